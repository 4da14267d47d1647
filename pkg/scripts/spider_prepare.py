"""Build every artifact the pipeline needs from an extracted Spider dataset.

Usage:
    python scripts/spider_prepare.py --spider-dir /path/to/spider --out-dir artifacts/

Produces the canonical corpus JSONL, the retrieval index snapshot, the word
frequency table, and a trained filter model, and prints headline statistics
(parser coverage, zero-distance neighbor fraction, key word frequencies).
"""

import argparse
import sys
import time
from pathlib import Path

from sqlsynth.corpus import load_examples, load_schemas, write_examples_jsonl
from sqlsynth.filtering import train_filter
from sqlsynth.masking import build_frequency_table
from sqlsynth.retrieval import build_index, save_index


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--spider-dir", required=True, type=Path)
    parser.add_argument("--out-dir", required=True, type=Path)
    parser.add_argument("--epochs", type=int, default=6)
    parser.add_argument("--learning-rate", type=float, default=0.3)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--skip-filter", action="store_true",
                        help="skip filter training (the slow step)")
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    examples = []
    for name in ("train_spider.json", "train_others.json"):
        path = args.spider_dir / name
        if path.exists():
            loaded = load_examples(path)
            print(f"{name}: {len(loaded.examples)} examples, "
                  f"{len(loaded.quarantine)} quarantined")
            examples.extend(loaded.examples)
    schemas = load_schemas(args.spider_dir / "tables.json",
                           args.spider_dir / "database")
    print(f"schemas: {len(schemas)}")

    corpus_path = args.out_dir / "train.jsonl"
    write_examples_jsonl(examples, corpus_path)

    t0 = time.time()
    index = build_index(examples, schemas)
    save_index(index, args.out_dir / "index.json")
    print(f"index: {len(index)} entries, coverage {index.coverage():.4f}, "
          f"{time.time() - t0:.0f}s")

    by_fp = index.by_fingerprint()
    with_three = sum(
        1 for entry in index.entries
        if sum(1 for other in by_fp[entry.fingerprint]
               if other.db_id != entry.db_id) >= 3)
    print(f"fraction with >=3 zero-distance cross-schema neighbors: "
          f"{with_three / len(index.entries):.4f}")

    table = build_frequency_table(examples)
    table.save(args.out_dir / "freq.tsv")
    for word in ("show", "what", "list", "order", "countries"):
        print(f"  schema-frequency[{word}] = {table.fractions.get(word, 0.0):.4f}")

    if not args.skip_filter:
        t0 = time.time()
        model, report = train_filter(examples, schemas, table,
                                     epochs=args.epochs,
                                     learning_rate=args.learning_rate,
                                     seed=args.seed)
        model.save(args.out_dir / "filter.json")
        print(f"filter: {report.groups} groups, "
              f"final loss {report.epoch_losses[-1]:.4f}, {time.time() - t0:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
