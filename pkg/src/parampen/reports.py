"""Run reports: named tables written as CSV plus a JSON summary.

CSV layout: the first line is ``# generated: <UTC timestamp>``; everything
after it (a ``#``-prefixed metadata line, the header and the rows) depends
only on the run configuration, so two runs with the same arguments and seed
produce byte-identical bodies.  Floats are written with ``repr`` (shortest
round-trip form).
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import enum
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .solver import MinimizingSequence

SEQUENCE_COLUMNS = ("rung", "lambda", "p", "f_value", "phi_value", "F_value", "g_value", "inner_status")


def utc_timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    if isinstance(v, enum.Enum):
        return str(v.value)
    return str(v)


def jsonable(obj: Any):
    """Recursively convert numpy values, enums and dataclasses for ``json``."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


@dataclass
class Table:
    columns: list
    rows: list


@dataclass
class RunReport:
    """Metadata, tables and verdicts of one CLI run."""

    metadata: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    timestamp: str = field(default_factory=utc_timestamp)

    def add_table(self, name: str, columns, rows) -> None:
        self.tables[name] = Table(list(columns), [list(r) for r in rows])

    def csv_text(self, name: str) -> str:
        table = self.tables[name]
        buf = io.StringIO()
        buf.write(f"# generated: {self.timestamp}\n")
        meta = ", ".join(f"{k}={format_cell(v)}" for k, v in sorted(self.metadata.items()))
        buf.write(f"# {meta}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([format_cell(v) for v in row])
        return buf.getvalue()

    def json_text(self) -> str:
        doc = {
            "generated": self.timestamp,
            "metadata": jsonable(self.metadata),
            "verdicts": jsonable(self.verdicts),
            "tables": {k: {"columns": t.columns, "rows": jsonable(t.rows)} for k, t in self.tables.items()},
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: str) -> list:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for name in self.tables:
            path = os.path.join(out_dir, f"{name}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(self.csv_text(name))
            paths.append(path)
        path = os.path.join(out_dir, "summary.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.json_text())
        paths.append(path)
        return paths


def csv_body(text: str) -> str:
    """CSV text without the timestamp line."""
    return text.split("\n", 1)[1] if text.startswith("# generated:") else text


def sequence_table(seq: MinimizingSequence, dim: int):
    columns = list(SEQUENCE_COLUMNS[:3]) + [f"x{i + 1}" for i in range(dim)] + list(SEQUENCE_COLUMNS[3:])
    rows = []
    for n, r in enumerate(seq.records):
        rows.append([n, r.lam, r.p, *np.atleast_1d(r.x).tolist(), r.f_value, r.phi_value, r.F_value,
                     r.g_value if r.g_value is not None else math.nan, r.inner_status])
    return columns, rows
