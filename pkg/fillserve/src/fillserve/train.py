"""Training entry for fill backends: validate a training-mixture JSONL and
hand the records to a backend adapter's fit routine."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .backends import ADAPTERS

MODES = ("naive", "sql_only", "cross_schema")


class MixtureFormatError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass
class MixtureReport:
    records: int = 0
    mode_counts: dict = field(default_factory=dict)
    checkpoint: str = ""

    def proportions(self) -> dict:
        if not self.records:
            return {mode: 0.0 for mode in MODES}
        return {mode: self.mode_counts.get(mode, 0) / self.records
                for mode in MODES}


def load_mixture(path: str | Path) -> list[dict]:
    """Parse and validate the mixture file; errors carry the line number."""
    records = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MixtureFormatError(f"not valid JSON ({exc.msg})", line_no)
            if not isinstance(record, dict):
                raise MixtureFormatError("record must be an object", line_no)
            mode = record.get("mode")
            if mode not in MODES:
                raise MixtureFormatError(f"unknown mode {mode!r}", line_no)
            for key in ("input", "target"):
                value = record.get(key)
                if not isinstance(value, str) or not value:
                    raise MixtureFormatError(f"missing or empty {key!r}", line_no)
            if not isinstance(record.get("meta", {}), dict):
                raise MixtureFormatError("meta must be an object", line_no)
            records.append(record)
    return records


def train_from_mixture(path: str | Path, adapter_name: str = "dummy",
                       hyperparameters: dict | None = None,
                       out_dir: str | Path = ".") -> MixtureReport:
    if adapter_name not in ADAPTERS:
        raise ValueError(f"unknown adapter {adapter_name!r}; "
                         f"available: {sorted(ADAPTERS)}")
    records = load_mixture(path)
    report = MixtureReport(records=len(records))
    for record in records:
        report.mode_counts[record["mode"]] = \
            report.mode_counts.get(record["mode"], 0) + 1
    adapter = ADAPTERS[adapter_name]()
    report.checkpoint = adapter.fit(records, hyperparameters or {}, str(out_dir))
    return report
