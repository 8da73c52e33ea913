"""CSV artifacts: header row, 17 significant digits, '\\n' line ends."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = ["Table", "emit_csv", "format_value", "read_csv", "table_text"]


@dataclass
class Table:
    header: list[str]
    rows: list[tuple] = field(default_factory=list)

    def __post_init__(self) -> None:
        w = len(self.header)
        for i, r in enumerate(self.rows):
            if len(r) != w:
                raise ValueError(f"row {i} has {len(r)} fields, header has {w}")

    def column(self, name: str) -> list:
        j = self.header.index(name)
        return [r[j] for r in self.rows]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        # format() ignores the locale, so the separator is always '.'
        return format(float(v), ".17g")
    return str(v)


def table_text(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for r in table.rows:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()


def emit_csv(table: Table | tuple[Sequence[str], Sequence[tuple]], path: str | Path) -> Path:
    if not isinstance(table, Table):
        header, rows = table
        table = Table(list(header), [tuple(r) for r in rows])
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(table_text(table))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None
    return path


def read_csv(path: str | Path) -> Table:
    """Read back a table; numeric fields become ``float``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for r in reader:
            out = []
            for v in r:
                try:
                    out.append(float(v))
                except ValueError:
                    out.append(v)
            rows.append(tuple(out))
    return Table(header, rows)
