"""Evidence containers: one financial table plus its surrounding text.

Row names resolve case-insensitively with punctuation and whitespace folded,
so a program argument "risk-free interest rate" finds the row even when the
table writes "Risk-Free Interest Rate".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .numeric import NotANumber, Quantity, extract_numbers, format_decimal, parse_quantity

_NORMALIZE_RE = re.compile(r"[^0-9a-z]+")


def normalize_row_name(name: str) -> str:
    return _NORMALIZE_RE.sub(" ", name.lower()).strip()


@dataclass(frozen=True)
class FinTable:
    """A single-header table: column labels plus (row name, cells) rows.

    ``header[0]`` labels the row-name column and is usually empty; the value
    columns are ``header[1:]``. Every row must have one cell per value column.
    """

    header: tuple[str, ...]
    rows: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        width = len(self.header) - 1
        for name, cells in self.rows:
            if len(cells) != width:
                raise ValueError(
                    f"row {name!r} has {len(cells)} cells for {width} value columns"
                )

    @classmethod
    def from_rows(cls, raw: list[list[str]]) -> "FinTable":
        """Build from a raw grid whose first row is the header."""
        if not raw or not raw[0]:
            raise ValueError("table needs a header row")
        header = tuple(str(c) for c in raw[0])
        rows = tuple(
            (str(r[0]) if r else "", tuple(str(c) for c in r[1:])) for r in raw[1:]
        )
        return cls(header=header, rows=rows)

    @property
    def column_labels(self) -> tuple[str, ...]:
        return self.header[1:]

    @property
    def row_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.rows)

    def matching_rows(self, name: str) -> list[int]:
        """Indexes of all rows whose normalized name equals the query's."""
        key = normalize_row_name(name)
        return [i for i, (row_name, _) in enumerate(self.rows) if normalize_row_name(row_name) == key]

    def find_row(self, name: str) -> int | None:
        """First row matching the name, or None. Ties resolve to the first."""
        matches = self.matching_rows(name)
        return matches[0] if matches else None

    def numeric_cells(self, index: int) -> list[Fraction]:
        """Numeric cell values of one row, in column order.

        Non-numeric cells (footnote marks, empty strings) are skipped. The
        row-name cell is never included.
        """
        values = []
        for cell in self.rows[index][1]:
            try:
                values.append(Fraction(parse_quantity(cell).mantissa))
            except NotANumber:
                continue
        return values


@dataclass(frozen=True)
class EvidenceContext:
    """Text sentences and one table, with numbers pre-extracted per sentence."""

    text_sentences: tuple[str, ...]
    table: FinTable

    @classmethod
    def build(cls, sentences, table: FinTable | None = None) -> "EvidenceContext":
        if table is None:
            table = FinTable(header=("",), rows=())
        return cls(text_sentences=tuple(sentences), table=table)

    @classmethod
    def empty(cls) -> "EvidenceContext":
        return cls.build(())

    @cached_property
    def sentence_quantities(self) -> tuple[tuple[Quantity, ...], ...]:
        return tuple(tuple(extract_numbers(s)) for s in self.text_sentences)

    @cached_property
    def _all_quantities(self) -> tuple[Quantity, ...]:
        """Numbers from sentences, then header labels, then rows (name, cells)."""
        found: list[Quantity] = []
        for quantities in self.sentence_quantities:
            found.extend(quantities)
        for label in self.table.header:
            found.extend(extract_numbers(label))
        for name, cells in self.table.rows:
            found.extend(extract_numbers(name))
            for cell in cells:
                found.extend(extract_numbers(cell))
        return tuple(found)

    @cached_property
    def number_values(self) -> frozenset[Fraction]:
        """Every number present anywhere in the evidence, as exact values."""
        return frozenset(Fraction(q.mantissa) for q in self._all_quantities)

    def number_tokens(self) -> list[str]:
        """Canonical number tokens in first-appearance order, deduplicated."""
        seen = set()
        tokens = []
        for q in self._all_quantities:
            token = format_decimal(q.mantissa)
            if token not in seen:
                seen.add(token)
                tokens.append(token)
        return tokens
