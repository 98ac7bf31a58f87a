"""Tabular results and their CSV / JSON serialization.

CSV files carry their metadata (and the summary report, if any) as leading
``#`` lines holding JSON; values are written with 17 significant digits so
a write/read cycle reproduces every double exactly.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["ResultTable", "format_value", "read_table"]

_META_PREFIX = "# metadata: "
_REPORT_PREFIX = "# report: "


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list[float]]
    metadata: dict = field(default_factory=dict)
    report: dict | None = None

    def __post_init__(self):
        self.columns = [str(c) for c in self.columns]
        self.rows = [[float(v) for v in row] for row in np.asarray(self.rows, dtype=float).reshape(-1, len(self.columns))]

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows])

    def __len__(self):
        return len(self.rows)

    # CSV

    def to_csv(self) -> str:
        out = io.StringIO(newline="")
        out.write(_META_PREFIX + json.dumps(_jsonable(self.metadata), sort_keys=True) + "\n")
        if self.report is not None:
            out.write(_REPORT_PREFIX + json.dumps(_jsonable(self.report), sort_keys=True) + "\n")
        out.write(",".join(self.columns) + "\n")
        for row in self.rows:
            out.write(",".join(format_value(v) for v in row) + "\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        metadata, report = {}, None
        header = None
        rows = []
        for line in text.split("\n"):
            if not line:
                continue
            if line.startswith(_META_PREFIX):
                metadata = json.loads(line[len(_META_PREFIX):])
            elif line.startswith(_REPORT_PREFIX):
                report = json.loads(line[len(_REPORT_PREFIX):])
            elif line.startswith("#"):
                continue
            elif header is None:
                header = line.split(",")
            else:
                rows.append([float(x) for x in line.split(",")])
        if header is None:
            raise ValueError("CSV has no header row")
        return cls(header, rows, metadata, report)

    # JSON

    def to_json(self) -> str:
        payload = {"metadata": self.metadata, "columns": self.columns, "rows": self.rows}
        if self.report is not None:
            payload["report"] = self.report
        return json.dumps(_jsonable(payload), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        payload = json.loads(text)
        return cls(payload["columns"], payload["rows"], payload.get("metadata", {}), payload.get("report"))

    def dumps(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()

    def write(self, path, fmt: str) -> None:
        Path(path).write_text(self.dumps(fmt), encoding="utf-8", newline="\n")


def read_table(path) -> ResultTable:
    """Load a table written by :meth:`ResultTable.write`; the format is sniffed from the content."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return ResultTable.from_json(text)
    return ResultTable.from_csv(text)
