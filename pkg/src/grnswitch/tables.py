"""Result tables with stable CSV/JSON serialization.

Floats are written with 17 significant digits so that reading a file and
writing it again reproduces it byte for byte. CSV files start with ``#``
comment lines carrying provenance and the column types.
"""
from __future__ import annotations

import csv
import io
import json
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .errors import ConfigError

__all__ = ["ResultTable", "emit", "read_csv", "format_float", "to_csv_text", "to_json_text", "table_from_records"]

_TYPES = {"float": float, "int": int, "str": str}


def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@dataclass
class ResultTable:
    name: str
    columns: list[tuple[str, str]]
    rows: list[tuple] = field(default_factory=list)
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.columns:
            raise ConfigError("a table needs at least one column")
        for col, kind in self.columns:
            if kind not in _TYPES:
                raise ConfigError(f"column {col!r} has unknown type {kind!r}")
            if "," in col or "\n" in col:
                raise ConfigError(f"bad column name {col!r}")

    @property
    def column_names(self) -> list[str]:
        return [c for c, _ in self.columns]

    def add(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ConfigError(f"{self.name}: expected {len(self.columns)} values, got {len(values)}")
        row = []
        for (col, kind), v in zip(self.columns, values):
            v = _TYPES[kind](v)
            if kind == "float" and not math.isfinite(v) and "status" not in self.column_names:
                raise ConfigError(f"{self.name}.{col}: non-finite value needs a status column")
            if kind == "str" and any(unicodedata.category(ch) == "Cc" for ch in v):
                raise ConfigError(f"{self.name}.{col}: control characters are not allowed in text cells")
            row.append(v)
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        k = self.column_names.index(name)
        return [r[k] for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def _cell(v: Any, kind: str) -> str:
    if kind == "float":
        return format_float(v)
    return str(v)


def to_csv_text(table: ResultTable) -> str:
    buf = io.StringIO()
    for key in sorted(table.provenance):
        buf.write(f"# {key}: {table.provenance[key]}\n")
    buf.write("# columns: " + ",".join(f"{c}:{k}" for c, k in table.columns) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.column_names)
    for row in table.rows:
        writer.writerow([_cell(v, k) for v, (_, k) in zip(row, table.columns)])
    return buf.getvalue()


def _json_value(v: Any, kind: str) -> str:
    if kind == "float":
        return format_float(v) if math.isfinite(v) else "null"
    if kind == "int":
        return str(v)
    return _json_str(v)


def _json_str(s: str) -> str:
    return json.dumps(s)


def to_json_text(table: ResultTable) -> str:
    lines = ["{"]
    lines.append(f'  "name": {_json_str(table.name)},')
    prov = ", ".join(f"{_json_str(k)}: {_json_str(table.provenance[k])}" for k in sorted(table.provenance))
    lines.append(f'  "provenance": {{{prov}}},')
    cols = ", ".join(f'{{"name": {_json_str(c)}, "type": "{k}"}}' for c, k in table.columns)
    lines.append(f'  "columns": [{cols}],')
    rows = [
        "    [" + ", ".join(_json_value(v, k) for v, (_, k) in zip(row, table.columns)) + "]"
        for row in table.rows
    ]
    lines.append('  "rows": [' + ("\n" + ",\n".join(rows) + "\n  " if rows else "") + "]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit(table: ResultTable, out_dir: str | Path, fmt: str = "csv") -> Path:
    """Write ``table`` to ``out_dir/<name>.<fmt>`` and return the path."""
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{table.name}.{fmt}"
    text = to_csv_text(table) if fmt == "csv" else to_json_text(table)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def read_csv(path: str | Path) -> ResultTable:
    """Inverse of :func:`emit` for CSV files."""
    path = Path(path)
    provenance: dict[str, str] = {}
    columns: list[tuple[str, str]] | None = None
    body: list[str] = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("# columns: "):
                spec = line[len("# columns: "):].rstrip("\n")
                columns = [tuple(item.rsplit(":", 1)) for item in spec.split(",")] if spec else []
            elif line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                provenance[key] = value
            else:
                body.append(line)
    if columns is None:
        raise ConfigError(f"{path}: missing column type line")
    reader = csv.reader(body)
    header = next(reader, None)
    if header != [c for c, _ in columns]:
        raise ConfigError(f"{path}: header does not match the column types")
    table = ResultTable(path.stem, [(c, k) for c, k in columns], provenance=provenance)
    for rec in reader:
        table.rows.append(tuple(_TYPES[k](v) for v, (_, k) in zip(rec, columns)))
    return table


def table_from_records(name: str, columns: Sequence[tuple[str, str]], records, provenance=None) -> ResultTable:
    t = ResultTable(name, list(columns), provenance=dict(provenance or {}))
    for rec in records:
        t.add(*rec)
    return t
