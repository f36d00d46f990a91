"""TF-IDF fact retrieval, recall@k, and the retrieve-then-divide baseline.

The weighting is the common smoothed variant: raw term counts scaled by
idf = ln((1+N)/(1+df)) + 1, L2-normalized, cosine-scored. Tokenization is
lowercase alphanumeric runs with numbers kept as tokens; pass a different
``tokenizer`` to experiment.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .corpus import EvidenceRecord, Fact, candidate_facts
from .dsl import ProgramError, parse_program
from .executor import ExecutionError, Value, execute
from .numeric import extract_numbers, format_decimal

_TOKEN_RE = re.compile(r"[a-z0-9]+")

Tokenizer = Callable[[str], list[str]]

#: Ranked retrieval output: (fact id, score) with scores non-increasing.
RankedFacts = list[tuple[str, float]]


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class EmptyCorpus(ValueError):
    pass


class NoGoldFacts(ValueError):
    pass


@dataclass(frozen=True)
class TfIdfIndex:
    """Immutable index over one fact collection; safe for concurrent queries.

    ``fact_ids`` keeps the insertion order, which is the tie-break order for
    equal scores; build from facts in document order.
    """

    fact_ids: tuple[str, ...]
    idf: dict
    vectors: tuple[dict, ...]
    tokenizer: Tokenizer


def _counts(tokens: list[str]) -> dict:
    counts: dict[str, float] = {}
    for token in tokens:
        counts[token] = counts.get(token, 0.0) + 1.0
    return counts


def _l2_normalize(vector: dict) -> dict:
    norm = math.sqrt(sum(w * w for w in vector.values()))
    if norm == 0.0:
        return dict(vector)
    return {t: w / norm for t, w in vector.items()}


def build_index(facts: Iterable[Fact], tokenizer: Tokenizer = tokenize) -> TfIdfIndex:
    """Index a fact collection; raises EmptyCorpus when there are no facts."""
    fact_list = list(facts)
    if not fact_list:
        raise EmptyCorpus("no facts to index")
    tokenized = [tokenizer(f.content) for f in fact_list]
    n = len(fact_list)
    df: dict[str, int] = {}
    for tokens in tokenized:
        for term in set(tokens):
            df[term] = df.get(term, 0) + 1
    idf = {term: math.log((1 + n) / (1 + count)) + 1.0 for term, count in df.items()}
    vectors = tuple(
        _l2_normalize({t: c * idf[t] for t, c in _counts(tokens).items()})
        for tokens in tokenized
    )
    return TfIdfIndex(
        fact_ids=tuple(f.id for f in fact_list),
        idf=idf,
        vectors=vectors,
        tokenizer=tokenizer,
    )


def rank(question: str, index: TfIdfIndex, k: int) -> RankedFacts:
    """Top-k facts by cosine similarity; ties break by document order."""
    query = {
        t: c * index.idf[t]
        for t, c in _counts(index.tokenizer(question)).items()
        if t in index.idf
    }
    query = _l2_normalize(query)
    scored = []
    for position, (fact_id, vector) in enumerate(zip(index.fact_ids, index.vectors)):
        score = sum(weight * vector.get(term, 0.0) for term, weight in query.items())
        scored.append((-score, position, fact_id))
    scored.sort()
    return [(fact_id, -neg_score) for neg_score, _, fact_id in scored[: max(k, 0)]]


def recall_at_k(ranked: RankedFacts, gold_ids: frozenset, k: int) -> float:
    """|gold among the top k| / |gold|. Raises NoGoldFacts on empty gold."""
    if not gold_ids:
        raise NoGoldFacts("the record has no gold facts")
    top = {fact_id for fact_id, _ in ranked[:k]}
    return len(top & set(gold_ids)) / len(gold_ids)


def corpus_recall(
    records: Iterable[EvidenceRecord], k: int, tokenizer: Tokenizer = tokenize
) -> tuple[float, list[tuple[str, float]]]:
    """Mean per-record recall@k, with the per-record values."""
    per_record = []
    for record in records:
        index = build_index(candidate_facts(record), tokenizer)
        ranked = rank(record.question, index, k)
        per_record.append((record.id, recall_at_k(ranked, record.gold_fact_ids, k)))
    if not per_record:
        raise EmptyCorpus("no records to evaluate")
    mean = sum(r for _, r in per_record) / len(per_record)
    return mean, per_record


@dataclass(frozen=True)
class SingleOpResult:
    """The baseline's emitted program, and its value or failure reason."""

    program_text: str
    value: Optional[Value]
    error: Optional[str]


def single_op_answer(
    record: EvidenceRecord, index: Optional[TfIdfIndex] = None
) -> SingleOpResult:
    """Retrieve the top two facts and divide their first numbers.

    When a retrieved fact has no number the program is emitted with whatever
    numbers exist and fails execution, scoring incorrect; the baseline never
    raises.
    """
    facts = candidate_facts(record)
    if index is None:
        index = build_index(facts)
    ranked = rank(record.question, index, 2)
    by_id = {f.id: f for f in facts}
    operands = []
    ctx = record.context()
    for fact_id, _ in ranked:
        fact = by_id[fact_id]
        if fact.source == "text":
            # candidate_facts keeps one running text index across pre/post
            position = int(fact.id.split(":")[1])
            quantities = ctx.sentence_quantities[position]
        else:
            quantities = tuple(extract_numbers(fact.content))
        if quantities:
            operands.append(format_decimal(quantities[0].mantissa))
    program_text = f"divide({', '.join(operands)})"
    try:
        program = parse_program(program_text)
        value = execute(program, ctx)
    except (ProgramError, ExecutionError) as exc:
        return SingleOpResult(program_text=program_text, value=None, error=str(exc))
    return SingleOpResult(program_text=program_text, value=value, error=None)
