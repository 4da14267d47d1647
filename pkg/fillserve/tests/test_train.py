"""Mixture-file validation and the dummy trainer."""

import json

import pytest

from fillserve.train import MixtureFormatError, load_mixture, train_from_mixture


def _write(tmp_path, rows):
    path = tmp_path / "mixture.jsonl"
    path.write_text("\n".join(json.dumps(r) if isinstance(r, dict) else r
                              for r in rows))
    return path


GOOD = [
    {"mode": "naive", "input": "TEMPLATE: MASK ⟨SEP⟩ SQL: find x",
     "target": "show x", "meta": {"example_id": 0}},
    {"mode": "sql_only", "input": "SQL: find y", "target": "show y",
     "meta": {"example_id": 1}},
    {"mode": "cross_schema", "input": "TEMPLATE: MASK ⟨SEP⟩ SQL: find z",
     "target": "show z", "meta": {"example_id": 2, "paired_example_id": 9}},
]


class TestLoadMixture:
    def test_valid_three_mode_file(self, tmp_path):
        path = _write(tmp_path, GOOD)
        records = load_mixture(path)
        assert len(records) == 3

    def test_missing_target_reports_line(self, tmp_path):
        rows = [GOOD[0], {"mode": "naive", "input": "SQL: x", "meta": {}}]
        path = _write(tmp_path, rows)
        with pytest.raises(MixtureFormatError) as err:
            load_mixture(path)
        assert err.value.line == 2

    def test_unknown_mode_reports_line(self, tmp_path):
        rows = [{"mode": "surprise", "input": "a", "target": "b", "meta": {}}]
        path = _write(tmp_path, rows)
        with pytest.raises(MixtureFormatError) as err:
            load_mixture(path)
        assert err.value.line == 1

    def test_broken_json_reports_line(self, tmp_path):
        path = _write(tmp_path, [json.dumps(GOOD[0]), "{not json"])
        with pytest.raises(MixtureFormatError) as err:
            load_mixture(path)
        assert err.value.line == 2


class TestTrainFromMixture:
    def test_dummy_trainer_writes_checkpoint(self, tmp_path):
        path = _write(tmp_path, GOOD)
        report = train_from_mixture(path, "dummy", {"epochs": 1}, tmp_path)
        assert report.records == 3
        assert (tmp_path / "dummy-checkpoint.json").exists()

    def test_mode_proportions_reported(self, tmp_path):
        rows = GOOD * 4  # 4 of each mode
        path = _write(tmp_path, rows)
        report = train_from_mixture(path, "dummy", out_dir=tmp_path)
        proportions = report.proportions()
        for mode in ("naive", "sql_only", "cross_schema"):
            assert proportions[mode] == pytest.approx(1 / 3)

    def test_unknown_adapter_rejected(self, tmp_path):
        path = _write(tmp_path, GOOD)
        with pytest.raises(ValueError):
            train_from_mixture(path, "transformer-9000", out_dir=tmp_path)

    def test_mixture_emitted_by_primary_validates(self, tmp_path):
        """The primary tool's emit-train-mixture output passes validation."""
        from sqlsynth.corpus import ParallelExample
        from sqlsynth.fill import build_training_mixture, write_training_mixture_jsonl
        from sqlsynth.masking import build_frequency_table
        from sqlsynth.retrieval import build_index

        rows = [
            ParallelExample("How many of the heads are older than 56 ?",
                            "SELECT count(*) FROM head WHERE age > 56", "gov"),
            ParallelExample("Count the games that came later than 2007 .",
                            "SELECT count(*) FROM game WHERE season > 2007",
                            "sports"),
            ParallelExample("How many of the films grossed more than 400 ?",
                            "SELECT count(*) FROM film WHERE gross_in_dollar > 400",
                            "cinema"),
        ]
        index = build_index(rows)
        table = build_frequency_table(rows)
        mixture = build_training_mixture(rows, index, table, seed=5)
        path = tmp_path / "emitted.jsonl"
        write_training_mixture_jsonl(mixture, path)
        report = train_from_mixture(path, "dummy", out_dir=tmp_path)
        assert report.records == 3
