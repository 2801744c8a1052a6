"""Parameter bindings: turning demonstrated text into per-row parameters.

When a demonstration types text that exactly matches a cell of the row it
was demonstrated on, the typed value generalizes to a column reference and
replays with each row's own cell value. Anything else stays a literal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import MissingColumn

LITERAL = "literal"
COLUMN = "column"


@dataclass(frozen=True)
class Binding:
    """Either a literal text or a reference to an input column."""

    kind: str  # LITERAL or COLUMN
    value: str

    def to_doc(self) -> dict:
        return {"kind": self.kind, "value": self.value}

    @staticmethod
    def from_doc(doc: dict) -> "Binding":
        return Binding(doc["kind"], doc["value"])


def literal(text: str) -> Binding:
    return Binding(LITERAL, text)


def column(name: str) -> Binding:
    return Binding(COLUMN, name)


@dataclass(frozen=True)
class BindingContext:
    """The schema plus the row currently being demonstrated or replayed."""

    columns: tuple[str, ...]
    active_row: dict[str, str]


def map_value(typed: str, ctx: BindingContext) -> Binding:
    """Decide whether typed text was really a row value.

    Matching is exact and case-sensitive after trimming the typed text;
    ties across columns resolve to the leftmost column. The exactness is
    deliberate: a looser match would parameterize text that only happened
    to resemble a cell.
    """
    candidate = typed.strip()
    for name in ctx.columns:
        if ctx.active_row.get(name) == candidate:
            return column(name)
    return literal(typed)


def bind_value(binding: Binding, ctx: BindingContext) -> str:
    """Produce the concrete text for one row."""
    if binding.kind == LITERAL:
        return binding.value
    if binding.value not in ctx.columns:
        raise MissingColumn(f"column {binding.value!r} is not in the schema")
    try:
        return ctx.active_row[binding.value]
    except KeyError:
        raise MissingColumn(f"row has no value for column {binding.value!r}") from None


def row_context(columns: list[str], row: dict[str, str]) -> BindingContext:
    return BindingContext(tuple(columns), dict(row))
