"""Typed tabular values exchanged between APIs, functions, and workers.

Cell representation by column type:
  TEXT str | INTEGER int | DECIMAL float | DATE datetime.date |
  PERCENT float fraction | CURRENCY int cents.
Currency stays integer cents internally so money never drifts; symbols are
attached only when a cell is formatted for humans. `NA` marks a value that
cannot be computed (zero-base percent change) and is legal in DECIMAL and
PERCENT cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Any, Iterable, Sequence

from .errors import BadTable


class ColumnType(str, Enum):
    TEXT = "text"
    INTEGER = "integer"
    DECIMAL = "decimal"
    DATE = "date"
    PERCENT = "percent"
    CURRENCY = "currency"


NUMERIC_TYPES = (
    ColumnType.INTEGER,
    ColumnType.DECIMAL,
    ColumnType.PERCENT,
    ColumnType.CURRENCY,
)


class NotAvailable:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NA"


NA = NotAvailable()


@dataclass(frozen=True)
class Column:
    name: str
    ctype: ColumnType

    def to_dict(self) -> dict:
        return {"name": self.name, "type": self.ctype.value}


def _cell_ok(value: Any, ctype: ColumnType) -> bool:
    if value is NA:
        return ctype in (ColumnType.DECIMAL, ColumnType.PERCENT)
    if ctype == ColumnType.TEXT:
        return isinstance(value, str)
    if ctype == ColumnType.INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    if ctype == ColumnType.DECIMAL:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if ctype == ColumnType.DATE:
        return isinstance(value, date)
    if ctype == ColumnType.PERCENT:
        # Fraction, rendered as value*100 with a % sign. May be negative or
        # exceed 1 (year-over-year changes); store-level conversion rates
        # enforce their own [0,1] bound.
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if ctype == ColumnType.CURRENCY:
        return isinstance(value, int) and not isinstance(value, bool)
    return False


@dataclass(frozen=True)
class DataTable:
    columns: tuple[Column, ...]
    rows: tuple[tuple, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise BadTable(f"duplicate column names: {names}")
        arity = len(self.columns)
        for r, row in enumerate(self.rows):
            if len(row) != arity:
                raise BadTable(f"row {r} has {len(row)} cells, expected {arity}")
            for col, value in zip(self.columns, row):
                if not _cell_ok(value, col.ctype):
                    raise BadTable(
                        f"row {r} column {col.name!r}: {value!r} is not a valid "
                        f"{col.ctype.value} cell"
                    )

    @staticmethod
    def build(columns: Iterable[tuple[str, ColumnType]], rows: Iterable[Sequence]) -> "DataTable":
        return DataTable(
            columns=tuple(Column(n, t) for n, t in columns),
            rows=tuple(tuple(row) for row in rows),
        )

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise BadTable(f"no column named {name!r}")

    def column(self, name: str) -> Column:
        return self.columns[self.column_index(name)]

    def column_values(self, name: str) -> tuple:
        i = self.column_index(name)
        return tuple(row[i] for row in self.rows)

    @property
    def is_empty(self) -> bool:
        return not self.rows

    def to_dict(self) -> dict:
        return {
            "columns": [c.to_dict() for c in self.columns],
            "rows": [[_cell_to_json(v) for v in row] for row in self.rows],
        }

    @staticmethod
    def from_dict(doc: dict) -> "DataTable":
        columns = tuple(Column(c["name"], ColumnType(c["type"])) for c in doc["columns"])
        rows = tuple(
            tuple(_cell_from_json(v, col.ctype) for v, col in zip(row, columns))
            for row in doc["rows"]
        )
        return DataTable(columns=columns, rows=rows)


def _cell_to_json(value: Any):
    if value is NA:
        return None
    if isinstance(value, date):
        return value.isoformat()
    return value


def _cell_from_json(value: Any, ctype: ColumnType):
    if value is None:
        return NA
    if ctype == ColumnType.DATE:
        return date.fromisoformat(value)
    return value


def format_cell(value: Any, ctype: ColumnType) -> str:
    """Human rendering; machine claims use these exact strings too."""
    if value is NA:
        return "n/a"
    if ctype == ColumnType.TEXT:
        return str(value)
    if ctype == ColumnType.INTEGER:
        return f"{value:,}"
    if ctype == ColumnType.DECIMAL:
        return f"{float(value):,.2f}"
    if ctype == ColumnType.DATE:
        return value.isoformat()
    if ctype == ColumnType.PERCENT:
        return f"{float(value) * 100:.2f}%"
    if ctype == ColumnType.CURRENCY:
        cents = int(value)
        sign = "-" if cents < 0 else ""
        return f"{sign}${abs(cents) / 100:,.2f}"
    raise BadTable(f"unknown column type {ctype!r}")


def render_table(table: DataTable) -> str:
    """Stable plain-text rendering used inside prompts."""
    if table.is_empty:
        return "| " + " | ".join(table.column_names) + " |\n(no rows)"
    header = "| " + " | ".join(table.column_names) + " |"
    lines = [header]
    for row in table.rows:
        cells = [format_cell(v, c.ctype) for v, c in zip(row, table.columns)]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)
