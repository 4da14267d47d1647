"""Command-line interface.

Every run that writes an artifact also writes a small manifest next to it
(config hash, seeds, package version) so outputs can be traced back to
their inputs.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__, corpus, filtering, masking, metrics, pipeline, retrieval
from .errors import SqlSynthError
from .fill import build_training_mixture, write_training_mixture_jsonl
from .sqlast import parse_sql
from .sql2eng import to_pseudo_english


@click.group()
@click.version_option(__version__)
def main():
    """Synthesize diverse (text, SQL) training pairs for new database
    schemas from an existing corpus."""


def _load_schemas(tables: str | None, db_dir: str | None):
    if tables is None:
        return None
    return corpus.load_schemas(tables, db_dir)


def _echo_quarantine(name: str, rows) -> None:
    if rows:
        click.echo(f"{name}: quarantined {len(rows)} row(s)", err=True)
        for row in rows[:5]:
            click.echo(f"  row {row.row}: {row.reason}", err=True)
        if len(rows) > 5:
            click.echo(f"  ... {len(rows) - 5} more", err=True)


@main.command()
@click.argument("example_files", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--tables", type=click.Path(exists=True),
              help="Spider tables.json for validation")
@click.option("--db-dir", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def ingest(example_files, tables, db_dir, out):
    """Load Spider-format example files into canonical JSONL."""
    examples = []
    for path in example_files:
        loaded = corpus.load_examples(path)
        _echo_quarantine(path, loaded.quarantine)
        examples.extend(loaded.examples)
    if tables:
        schemas = _load_schemas(tables, db_dir)
        validated = corpus.validate_corpus(examples, schemas)
        _echo_quarantine("validation", validated.quarantine)
        examples = validated.examples
    count = corpus.write_examples_jsonl(examples, out)
    click.echo(f"wrote {count} examples to {out}")


@main.command("build-index")
@click.option("--examples", "examples_path", required=True, type=click.Path(exists=True))
@click.option("--tables", type=click.Path(exists=True))
@click.option("--db-dir", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def build_index_cmd(examples_path, tables, db_dir, out):
    """Parse a JSONL corpus and persist the retrieval index snapshot."""
    examples = corpus.read_examples_jsonl(examples_path)
    schemas = _load_schemas(tables, db_dir)
    index = retrieval.build_index(examples, schemas)
    _echo_quarantine("parse", index.quarantine)
    retrieval.save_index(index, out)
    click.echo(f"indexed {len(index)} / {len(examples)} examples "
               f"(coverage {index.coverage():.3f}) -> {out}")


@main.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=3, show_default=True)
@click.option("--bin-width", default=0.02, show_default=True)
@click.option("--out", type=click.Path(), help="CSV histogram destination")
def stats(index_path, k, bin_width, out):
    """Neighbor-distance statistics over an index snapshot."""
    index = retrieval.load_index(index_path)
    result = retrieval.neighbor_stats(index, k=k, bin_width=bin_width)
    click.echo(f"entries: {len(index)}")
    click.echo(f"fraction with >={k} zero-distance cross-schema neighbors: "
               f"{result.zero_neighbor_fraction:.4f}")
    if out:
        Path(out).write_text(result.to_csv(), encoding="utf-8")
        click.echo(f"histogram -> {out}")


@main.command("freq-table")
@click.option("--examples", "examples_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def freq_table_cmd(examples_path, out):
    """Build the schema-document word frequency table (TSV)."""
    examples = corpus.read_examples_jsonl(examples_path)
    table = masking.build_frequency_table(examples)
    table.save(out)
    click.echo(f"{len(table.fractions)} words over {table.schema_count} schemas -> {out}")


@main.command()
@click.option("--freq-table", "table_path", type=click.Path(exists=True))
@click.option("--text", required=True)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--schema-match", is_flag=True,
              help="use the schema-name matching baseline instead")
@click.option("--tables", type=click.Path(exists=True),
              help="tables.json (for --schema-match)")
@click.option("--db-id", help="source schema id (for --schema-match)")
def mask(table_path, text, threshold, schema_match, tables, db_id):
    """Preview a masker on a piece of text."""
    if schema_match:
        if not (tables and db_id):
            raise click.ClickException("--schema-match needs --tables and --db-id")
        schema = corpus.load_schemas(tables).get(db_id)
        if schema is None:
            raise click.ClickException(f"unknown db_id {db_id!r}")
        template = masking.mask_schema_match(text, schema)
    else:
        if not table_path:
            raise click.ClickException("pass --freq-table (or --schema-match)")
        table = masking.SchemaFrequencyTable.load(table_path)
        template = masking.mask_frequency(text, table, threshold)
    click.echo(template.text)


@main.command("emit-train-mixture")
@click.option("--examples", "examples_path", required=True, type=click.Path(exists=True))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--freq-table", "table_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=13, show_default=True)
@click.option("--out", required=True, type=click.Path())
def emit_train_mixture(examples_path, index_path, table_path, seed, out):
    """Emit the three-way robust training mixture as JSONL."""
    examples = corpus.read_examples_jsonl(examples_path)
    index = retrieval.load_index(index_path)
    table = masking.SchemaFrequencyTable.load(table_path)
    result = build_training_mixture(examples, index, table, seed)
    write_training_mixture_jsonl(result, out)
    counts = result.mode_counts()
    click.echo(f"records: {len(result.records)}  modes: {counts}  "
               f"cross-schema fallbacks: {result.fallback_count}")


@main.command("filter-train")
@click.option("--examples", "examples_path", required=True, type=click.Path(exists=True))
@click.option("--tables", required=True, type=click.Path(exists=True))
@click.option("--db-dir", type=click.Path(exists=True))
@click.option("--freq-table", "table_path", required=True, type=click.Path(exists=True))
@click.option("--epochs", default=12, show_default=True)
@click.option("--learning-rate", default=0.5, show_default=True)
@click.option("--seed", default=13, show_default=True)
@click.option("--out", required=True, type=click.Path())
def filter_train(examples_path, tables, db_dir, table_path, epochs,
                 learning_rate, seed, out):
    """Train the consistency filter on corpus positives + generated
    negatives."""
    examples = corpus.read_examples_jsonl(examples_path)
    schemas = _load_schemas(tables, db_dir)
    table = masking.SchemaFrequencyTable.load(table_path)
    model, report = filtering.train_filter(
        examples, schemas, table, epochs=epochs,
        learning_rate=learning_rate, seed=seed)
    model.save(out)
    click.echo(f"groups: {report.groups}  skipped: {report.skipped_examples}")
    click.echo("epoch losses: " + ", ".join(f"{l:.4f}" for l in report.epoch_losses))
    click.echo(f"model -> {out}")


@main.command("filter-score")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--freq-table", "table_path", required=True, type=click.Path(exists=True))
@click.option("--sql", required=True)
@click.option("--text", required=True)
@click.option("--tables", type=click.Path(exists=True))
@click.option("--db-id")
def filter_score(model_path, table_path, sql, text, tables, db_id):
    """Score one (text, SQL) pair under a trained filter model."""
    model = filtering.FilterModel.load(model_path)
    table = masking.SchemaFrequencyTable.load(table_path)
    schema = None
    if tables and db_id:
        schema = corpus.load_schemas(tables).get(db_id)
    tree = parse_sql(sql, schema)
    pseudo = to_pseudo_english(tree)
    score = model.score(text, tree, pseudo, table)
    click.echo(f"score={score:.6f}  probability={filtering.sigmoid(score):.6f}")


@main.command()
@click.option("--examples", "examples_path", required=True, type=click.Path(exists=True))
@click.option("--tables", required=True, type=click.Path(exists=True))
@click.option("--db-dir", type=click.Path(exists=True))
@click.option("--db-id", required=True)
@click.option("--fraction", default=0.7, show_default=True)
@click.option("--seed", default=13, show_default=True)
@click.option("--out", required=True, type=click.Path())
def workload(examples_path, tables, db_dir, db_id, fraction, seed, out):
    """Sample an SQL workload for a target schema, resampling constants."""
    examples = corpus.read_examples_jsonl(examples_path)
    schemas = _load_schemas(tables, db_dir)
    if db_id not in schemas:
        raise click.ClickException(f"unknown db_id {db_id!r}")
    sampled = pipeline.sample_workload(examples, fraction, schemas[db_id], seed)
    Path(out).write_text(json.dumps({
        "db_id": sampled.db_id, "fraction": sampled.fraction,
        "seed": sampled.seed, "queries": list(sampled.queries),
    }, indent=2), encoding="utf-8")
    click.echo(f"{len(sampled.queries)} workload queries -> {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--workload", "workload_path", type=click.Path(exists=True),
              help="workload JSON produced by the `workload` command")
@click.option("--target-db", help="sample a workload inline for this schema")
@click.option("--backend", type=click.Choice(["heuristic", "remote"]))
@click.option("--endpoint")
@click.option("--out", type=click.Path())
@click.option("--dry-run", is_flag=True, help="print per-stage counts, write nothing")
def synthesize(config_path, workload_path, target_db, backend, endpoint, out, dry_run):
    """Translate an SQL workload into filtered (text, SQL) pairs."""
    overrides = {"backend": backend, "endpoint": endpoint, "output": out}
    if config_path:
        config = pipeline.PipelineConfig.from_json(config_path, **overrides)
    else:
        config = pipeline.PipelineConfig(
            **{k: v for k, v in overrides.items() if v is not None})

    if not config.index_snapshot or not config.frequency_table:
        raise click.ClickException("config needs index_snapshot and frequency_table")
    index = retrieval.load_index(config.index_snapshot)
    table = masking.SchemaFrequencyTable.load(config.frequency_table)
    if config.filter_model:
        model = filtering.FilterModel.load(config.filter_model)
    else:
        click.echo("no filter model configured: using an untrained scorer", err=True)
        import numpy as np
        model = filtering.FilterModel(weights=np.zeros(filtering.FEATURE_DIM))

    schemas = _load_schemas(config.tables, config.db_dir) or {}
    if workload_path:
        payload = json.loads(Path(workload_path).read_text(encoding="utf-8"))
        load = corpus.Workload(payload["db_id"], tuple(payload["queries"]),
                               payload.get("fraction", 1.0), payload.get("seed", 0))
    elif target_db:
        if not config.train_examples:
            raise click.ClickException("inline workload needs config.train_examples")
        examples = corpus.read_examples_jsonl(config.train_examples)
        if target_db not in schemas:
            raise click.ClickException(f"unknown db_id {target_db!r}")
        load = pipeline.sample_workload(examples, config.workload_fraction,
                                        schemas[target_db], config.seed)
    else:
        raise click.ClickException("pass --workload or --target-db")

    fill_backend = pipeline.make_backend(config)
    pairs, report = pipeline.synthesize(
        load, index, table, fill_backend, model, config,
        schema=schemas.get(load.db_id))
    click.echo(f"workload SQLs: {len(load.queries)}  kept pairs: {report.total_kept}  "
               f"fallback rate: {report.fallback_rate:.3f}")
    if dry_run:
        for row in report.per_sql:
            click.echo(f"  [{row['workload_index']}] retrieved={row['retrieved']} "
                       f"generated={row['generated']} kept={row['kept']}")
        return
    if not config.output:
        raise click.ClickException("no output path configured (use --out)")
    pipeline.write_pairs_jsonl(pairs, config.output)
    pipeline.write_manifest(config, report, str(config.output) + ".manifest.json")
    click.echo(f"pairs -> {config.output}")


@main.command()
@click.option("--predictions", required=True, type=click.Path(exists=True),
              help="one predicted SQL per line")
@click.option("--gold", required=True, type=click.Path(exists=True),
              help="canonical JSONL (question/sql/db_id) or 'sql\\tdb_id' lines")
@click.option("--tables", required=True, type=click.Path(exists=True))
@click.option("--db-dir", type=click.Path(exists=True))
@click.option("--execution", is_flag=True, help="also run execution accuracy")
@click.option("--out", type=click.Path(), help="write the JSON report here")
def evaluate(predictions, gold, tables, db_dir, execution, out):
    """Exact-set-match (and optionally execution) evaluation."""
    preds = [line.strip() for line in
             Path(predictions).read_text(encoding="utf-8").splitlines()
             if line.strip()]
    golds: list[tuple[str, str]] = []
    gold_text = Path(gold).read_text(encoding="utf-8")
    for line in gold_text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            payload = json.loads(line)
            golds.append((payload["sql"], payload["db_id"]))
        else:
            sql, db_id = line.rsplit("\t", 1)
            golds.append((sql, db_id))
    if len(preds) != len(golds):
        raise click.ClickException(
            f"{len(preds)} predictions vs {len(golds)} gold rows")
    schemas = _load_schemas(tables, db_dir)
    report = metrics.evaluate_pairs(
        [(p, g_sql, g_db) for p, (g_sql, g_db) in zip(preds, golds)],
        schemas, with_execution=execution)
    click.echo(report.render_table())
    if out:
        Path(out).write_text(json.dumps({
            "rows": report.rows, "aggregates": report.aggregates(),
        }, indent=2), encoding="utf-8")


def entrypoint():
    """Console-script wrapper: toolkit errors print one line, not a trace."""
    try:
        main(standalone_mode=True)
    except SqlSynthError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":  # pragma: no cover
    entrypoint()
