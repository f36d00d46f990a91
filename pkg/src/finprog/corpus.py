"""Dataset ingestion, table linearization, candidate facts, and corpus stats.

The record file holds one JSON object per line (a whole-file JSON array is
also accepted) with fields ``{id, pre_text[], post_text[], table[][],
qa{question, program, exe_ans, gold_inds}}``; docs/formats.md documents the
format bit-exactly. Malformed records are collected into a rejects report
rather than silently dropped, and legacy spellings (``text_3`` fact ids,
trailing "none" arguments on table operations) are normalized with warnings.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Optional

from .context import EvidenceContext, FinTable
from .dsl import Program, ProgramError, parse_program, validate

__all__ = [
    "FinTable",
    "Fact",
    "EvidenceRecord",
    "RejectedRecord",
    "LoadResult",
    "FileUnreadable",
    "SchemaError",
    "load_records",
    "linearize_table",
    "candidate_facts",
    "dataset_stats",
    "StatsReport",
]


class FileUnreadable(Exception):
    pass


class SchemaError(Exception):
    """A file-level format problem; per-record problems become rejects."""

    def __init__(self, message: str, record_id: str = "", field_path: str = ""):
        self.record_id = record_id
        self.field_path = field_path
        super().__init__(message)


@dataclass(frozen=True)
class Fact:
    """One candidate supporting fact: a text sentence or a linearized row."""

    id: str
    content: str
    source: str  # "text" or "table"


@dataclass(frozen=True)
class EvidenceRecord:
    id: str
    pre_text: tuple[str, ...]
    post_text: tuple[str, ...]
    table: FinTable
    question: str
    gold_program: Program
    gold_answer: object
    gold_fact_ids: frozenset[str]
    warnings: tuple[str, ...] = ()

    def context(self) -> EvidenceContext:
        return EvidenceContext.build(self.pre_text + self.post_text, self.table)


@dataclass(frozen=True)
class RejectedRecord:
    id: str
    field_path: str
    reason: str


@dataclass
class LoadResult:
    records: list[EvidenceRecord]
    rejects: list[RejectedRecord]

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def linearize_table(table: FinTable) -> list[str]:
    """One templated sentence per row: "the <row> of <column> is <cell> ; ...".

    Columns whose cell is empty contribute no clause. The output always has
    exactly one entry per table row, even when every clause is omitted.
    """
    sentences = []
    for name, cells in table.rows:
        clauses = [
            f"the {name} of {label} is {cell}"
            for label, cell in zip(table.column_labels, cells)
            if str(cell).strip()
        ]
        sentences.append(" ; ".join(clauses) + " ;" if clauses else "")
    return sentences


def _fact_ids(n_pre: int, n_rows: int, n_post: int) -> list[str]:
    ids = [f"text:{i}" for i in range(n_pre)]
    ids += [f"row:{i}" for i in range(n_rows)]
    ids += [f"text:{n_pre + i}" for i in range(n_post)]
    return ids


def candidate_facts(record: EvidenceRecord) -> list[Fact]:
    """All supporting-fact candidates in document order.

    Text sentences keep a single running index across pre- and post-table
    text; table rows sit at the table's position with their own row indexes.
    Ids are stable across loads.
    """
    facts = [
        Fact(id=f"text:{i}", content=s, source="text")
        for i, s in enumerate(record.pre_text)
    ]
    facts += [
        Fact(id=f"row:{i}", content=s, source="table")
        for i, s in enumerate(linearize_table(record.table))
    ]
    offset = len(record.pre_text)
    facts += [
        Fact(id=f"text:{offset + i}", content=s, source="text")
        for i, s in enumerate(record.post_text)
    ]
    return facts


_NONE_ARG_RE = re.compile(
    r"(table-(?:sum|average|max|min)\s*\(\s*[^(),]*?)\s*,\s*none\s*\)",
    re.IGNORECASE,
)


def normalize_program_text(text: str) -> tuple[str, list[str]]:
    """Ingestion clean-up for legacy program spellings, with warnings."""
    warnings = []
    cleaned = text.strip()
    replaced = _NONE_ARG_RE.sub(r"\1)", cleaned)
    if replaced != cleaned:
        warnings.append("dropped placeholder 'none' argument from a table operation")
        cleaned = replaced
    return cleaned, warnings


_CANONICAL_ID_RE = re.compile(r"(text|row):(\d+)")
_RELEASE_ID_RE = re.compile(r"(text|table)_(\d+)")


def _normalize_content(text: str) -> str:
    text = re.sub(r"\s+", " ", str(text).lower()).strip()
    return text.rstrip(" ;.")


def _map_gold_ind(
    key: str,
    content: Optional[str],
    facts: list[Fact],
    warnings: list[str],
) -> Optional[str]:
    """Map one gold fact id, preferring content verification for legacy keys."""
    fact_ids = {f.id for f in facts}
    if _CANONICAL_ID_RE.fullmatch(key):
        return key if key in fact_ids else None
    m = _RELEASE_ID_RE.fullmatch(key)
    if m is None:
        return None
    kind, index = m.group(1), int(m.group(2))
    mapped = f"text:{index}" if kind == "text" else f"row:{index}"
    by_id = {f.id: f for f in facts}
    if content is not None:
        want = _normalize_content(content)
        got = by_id.get(mapped)
        if got is not None and _normalize_content(got.content) == want:
            warnings.append(f"mapped legacy fact id {key!r} to {mapped!r}")
            return mapped
        for f in facts:
            if _normalize_content(f.content) == want:
                warnings.append(f"matched legacy fact id {key!r} to {f.id!r} by content")
                return f.id
    if mapped in fact_ids:
        warnings.append(f"mapped legacy fact id {key!r} to {mapped!r}")
        return mapped
    return None


class _RecordBuilder:
    def __init__(self, raw: dict, ordinal: int):
        self.raw = raw
        self.ordinal = ordinal
        self.record_id = str(raw.get("id") or f"record-{ordinal}")
        self.warnings: list[str] = []

    def _fail(self, field_path: str, reason: str) -> RejectedRecord:
        return RejectedRecord(id=self.record_id, field_path=field_path, reason=reason)

    def _sentences(self, name: str):
        value = self.raw.get(name, [])
        if not isinstance(value, list) or any(not isinstance(s, str) for s in value):
            raise _BuildError(name, "must be a list of sentences")
        return tuple(value)

    def build(self) -> EvidenceRecord | RejectedRecord:
        try:
            return self._build()
        except _BuildError as exc:
            return self._fail(exc.field_path, exc.reason)

    def _build(self) -> EvidenceRecord:
        raw = self.raw
        if not isinstance(raw, dict):
            raise _BuildError("", "record is not an object")
        pre_text = self._sentences("pre_text")
        post_text = self._sentences("post_text")
        raw_table = raw.get("table")
        if not isinstance(raw_table, list):
            raise _BuildError("table", "must be a list of rows")
        try:
            table = FinTable.from_rows(raw_table)
        except ValueError as exc:
            raise _BuildError("table", str(exc))
        qa = raw.get("qa")
        if not isinstance(qa, dict):
            raise _BuildError("qa", "must be an object")
        question = qa.get("question")
        if not isinstance(question, str) or not question.strip():
            raise _BuildError("qa.question", "must be a non-empty string")
        program_text = qa.get("program")
        if not isinstance(program_text, str):
            raise _BuildError("qa.program", "must be a string")
        program_text, warnings = normalize_program_text(program_text)
        self.warnings.extend(warnings)
        try:
            program = parse_program(program_text)
        except ProgramError as exc:
            raise _BuildError("qa.program", str(exc))
        errors = [d for d in validate(program) if d.severity == "error"]
        if errors:
            raise _BuildError("qa.program", errors[0].message)
        if "exe_ans" not in qa:
            raise _BuildError("qa.exe_ans", "missing")

        record = EvidenceRecord(
            id=self.record_id,
            pre_text=pre_text,
            post_text=post_text,
            table=table,
            question=question,
            gold_program=program,
            gold_answer=qa["exe_ans"],
            gold_fact_ids=frozenset(),
            warnings=(),
        )
        facts = candidate_facts(record)
        gold_ids = self._gold_ids(qa.get("gold_inds"), facts)

        # grounding problems are ingestion warnings, not rejects
        ctx = record.context()
        for diag in validate(program, ctx):
            self.warnings.append(f"gold program: {diag.message}")

        return EvidenceRecord(
            id=record.id,
            pre_text=record.pre_text,
            post_text=record.post_text,
            table=record.table,
            question=record.question,
            gold_program=record.gold_program,
            gold_answer=record.gold_answer,
            gold_fact_ids=gold_ids,
            warnings=tuple(self.warnings),
        )

    def _gold_ids(self, raw_inds, facts: list[Fact]) -> frozenset[str]:
        if raw_inds is None:
            raise _BuildError("qa.gold_inds", "missing")
        if isinstance(raw_inds, dict):
            items: Iterable[tuple[str, Optional[str]]] = (
                (str(k), str(v)) for k, v in raw_inds.items()
            )
        elif isinstance(raw_inds, list):
            items = ((str(k), None) for k in raw_inds)
        else:
            raise _BuildError("qa.gold_inds", "must be a list or an object")
        ids = set()
        for key, content in items:
            mapped = _map_gold_ind(key, content, facts, self.warnings)
            if mapped is None:
                raise _BuildError(
                    "qa.gold_inds", f"{key!r} does not resolve to a candidate fact"
                )
            ids.add(mapped)
        return frozenset(ids)


class _BuildError(Exception):
    def __init__(self, field_path: str, reason: str):
        self.field_path = field_path
        self.reason = reason
        super().__init__(f"{field_path}: {reason}")


def load_records(path) -> LoadResult:
    """Load and schema-validate a record file.

    Raises FileUnreadable for IO problems and SchemaError for file-level
    format problems (an empty file, or content that is neither a JSON array
    nor JSON lines). Per-record problems become RejectedRecord entries.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            content = handle.read()
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    stripped = content.strip()
    if not stripped:
        raise SchemaError(f"{path} is empty")

    raw_records: list[tuple[dict, int]] = []
    rejects: list[RejectedRecord] = []
    if stripped.startswith("["):
        try:
            parsed = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path} is not valid JSON: {exc}")
        if not isinstance(parsed, list):
            raise SchemaError(f"{path} must hold a list of records")
        raw_records = [(item, i) for i, item in enumerate(parsed)]
    else:
        for line_no, line in enumerate(stripped.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw_records.append((json.loads(line), line_no))
            except json.JSONDecodeError as exc:
                rejects.append(
                    RejectedRecord(
                        id=f"line-{line_no}", field_path="", reason=f"invalid JSON: {exc}"
                    )
                )

    records: list[EvidenceRecord] = []
    for raw, ordinal in raw_records:
        built = _RecordBuilder(raw, ordinal).build()
        if isinstance(built, EvidenceRecord):
            records.append(built)
        else:
            rejects.append(built)
    return LoadResult(records=records, rejects=rejects)


def _tokens(text: str) -> int:
    return len(text.split())


_PAGE_SUFFIX_RE = re.compile(r"-\d+$")


@dataclass(frozen=True)
class StatsReport:
    """Corpus-level statistics in the shape of the dataset's summary table."""

    examples: int
    report_pages: int
    vocabulary: int
    avg_text_sentences: float
    avg_text_tokens: float
    avg_table_rows: float
    avg_table_tokens: float
    avg_input_tokens: float
    max_input_tokens: int
    avg_question_tokens: float
    source_pct: dict
    fact_count_pct: dict
    fact_distance_pct: dict
    op_pct: dict
    step_pct: dict

    def to_dict(self) -> dict:
        return {
            "examples": self.examples,
            "report_pages": self.report_pages,
            "vocabulary": self.vocabulary,
            "avg_text_sentences": self.avg_text_sentences,
            "avg_text_tokens": self.avg_text_tokens,
            "avg_table_rows": self.avg_table_rows,
            "avg_table_tokens": self.avg_table_tokens,
            "avg_input_tokens": self.avg_input_tokens,
            "max_input_tokens": self.max_input_tokens,
            "avg_question_tokens": self.avg_question_tokens,
            "source_pct": dict(self.source_pct),
            "fact_count_pct": dict(self.fact_count_pct),
            "fact_distance_pct": dict(self.fact_distance_pct),
            "op_pct": dict(self.op_pct),
            "step_pct": dict(self.step_pct),
        }

    def format_table(self) -> str:
        lines = [
            f"examples                 {self.examples}",
            f"report pages             {self.report_pages}",
            f"vocabulary               {self.vocabulary}",
            f"avg sentences in text    {self.avg_text_sentences:.2f}",
            f"avg tokens in text       {self.avg_text_tokens:.2f}",
            f"avg rows in table        {self.avg_table_rows:.2f}",
            f"avg tokens in table      {self.avg_table_tokens:.2f}",
            f"avg tokens in all inputs {self.avg_input_tokens:.2f}",
            f"max tokens in all inputs {self.max_input_tokens}",
            f"avg question length      {self.avg_question_tokens:.2f}",
        ]

        def block(title: str, pct: dict) -> None:
            lines.append(title)
            for key, value in pct.items():
                lines.append(f"  {key:<12} {value:.2f}%")

        block("fact sources", self.source_pct)
        block("fact counts", self.fact_count_pct)
        block("fact distances (2+ facts)", self.fact_distance_pct)
        block("operations", self.op_pct)
        block("program steps", self.step_pct)
        return "\n".join(lines)


def _pct(counts: dict, total: int) -> dict:
    if total == 0:
        return {k: 0.0 for k in counts}
    return {k: 100.0 * v / total for k, v in counts.items()}


def dataset_stats(records: list[EvidenceRecord]) -> StatsReport:
    """Counts, averages, and distributions over a loaded corpus.

    Token counts use whitespace tokenization; one table row counts as one
    "sentence" for fact distances, which are measured over the candidate-fact
    ordering.
    """
    if not records:
        raise ValueError("need at least one record")

    n = len(records)
    pages = {_PAGE_SUFFIX_RE.sub("", r.id) for r in records}
    vocabulary: set[str] = set()
    text_sentences = text_tokens = table_rows = table_tokens = 0
    input_tokens_total = 0
    max_input_tokens = 0
    question_tokens = 0
    source_counts = {"text-only": 0, "table-only": 0, "table-text": 0}
    fact_count_counts = {"1": 0, "2": 0, ">2": 0}
    fact_distance_counts = {"<=3": 0, "4-6": 0, ">6": 0}
    multi_fact_records = 0
    op_counts: dict[str, int] = {}
    total_steps = 0
    step_counts = {"1": 0, "2": 0, ">2": 0}

    for record in records:
        sentences = record.pre_text + record.post_text
        text_sentences += len(sentences)
        record_text_tokens = sum(_tokens(s) for s in sentences)
        text_tokens += record_text_tokens
        for s in sentences:
            vocabulary.update(w.lower() for w in s.split())

        table_rows += len(record.table.rows)
        record_table_tokens = sum(_tokens(label) for label in record.table.header)
        for name, cells in record.table.rows:
            record_table_tokens += _tokens(name) + sum(_tokens(c) for c in cells)
            vocabulary.update(w.lower() for w in name.split())
            for c in cells:
                vocabulary.update(w.lower() for w in c.split())
        for label in record.table.header:
            vocabulary.update(w.lower() for w in label.split())
        table_tokens += record_table_tokens

        record_input_tokens = record_text_tokens + record_table_tokens
        input_tokens_total += record_input_tokens
        max_input_tokens = max(max_input_tokens, record_input_tokens)
        question_tokens += _tokens(record.question)

        sources = {fid.split(":")[0] for fid in record.gold_fact_ids}
        if sources == {"text"}:
            source_counts["text-only"] += 1
        elif sources == {"row"}:
            source_counts["table-only"] += 1
        elif sources:
            source_counts["table-text"] += 1

        count = len(record.gold_fact_ids)
        if count == 1:
            fact_count_counts["1"] += 1
        elif count == 2:
            fact_count_counts["2"] += 1
        elif count > 2:
            fact_count_counts[">2"] += 1
        if count >= 2:
            multi_fact_records += 1
            positions = {f.id: i for i, f in enumerate(candidate_facts(record))}
            spots = sorted(positions[fid] for fid in record.gold_fact_ids)
            distance = spots[-1] - spots[0]
            if distance <= 3:
                fact_distance_counts["<=3"] += 1
            elif distance <= 6:
                fact_distance_counts["4-6"] += 1
            else:
                fact_distance_counts[">6"] += 1

        steps = len(record.gold_program.steps)
        total_steps += steps
        if steps == 1:
            step_counts["1"] += 1
        elif steps == 2:
            step_counts["2"] += 1
        else:
            step_counts[">2"] += 1
        for step in record.gold_program.steps:
            op_counts[step.op] = op_counts.get(step.op, 0) + 1

    return StatsReport(
        examples=n,
        report_pages=len(pages),
        vocabulary=len(vocabulary),
        avg_text_sentences=text_sentences / n,
        avg_text_tokens=text_tokens / n,
        avg_table_rows=table_rows / n,
        avg_table_tokens=table_tokens / n,
        avg_input_tokens=input_tokens_total / n,
        max_input_tokens=max_input_tokens,
        avg_question_tokens=question_tokens / n,
        source_pct=_pct(source_counts, n),
        fact_count_pct=_pct(fact_count_counts, n),
        fact_distance_pct=_pct(fact_distance_counts, multi_fact_records),
        op_pct=_pct(op_counts, total_steps),
        step_pct=_pct(step_counts, n),
    )
