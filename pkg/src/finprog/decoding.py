"""Grammar-constrained decoding: legal next-token masks over program tokens.

The decoder alphabet has three disjoint parts: tokens harvested from the
evidence (numbers and table row names), the language's own special tokens
(operation names, constants, punctuation), and step memory tokens #0..#K-1.
A mask at each position admits exactly the tokens that keep the prefix
extensible to a valid program, so every completed walk parses and validates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .context import EvidenceContext
from .dsl import (
    DEFAULT_CONSTANTS,
    MATH_OPS,
    TABLE_OPS,
    RowName,
    arity,
    result_kind,
)

PUNCTUATION = ("(", ")", ",")


class IllegalToken(ValueError):
    """A token outside the current mask was fed to the decoder."""


@dataclass(frozen=True)
class TokenVocabulary:
    """The candidate tokens for one evidence context.

    ``input_numbers`` and ``input_rows`` come from the evidence;
    ``constant_names`` from the configured constant vocabulary;
    ``max_steps`` bounds the step memory tokens to #0..#(max_steps-1).
    """

    input_numbers: tuple[str, ...]
    input_rows: tuple[str, ...]
    constant_names: tuple[str, ...]
    max_steps: int

    @property
    def input_tokens(self) -> tuple[str, ...]:
        return self.input_numbers + self.input_rows

    @property
    def special_tokens(self) -> tuple[str, ...]:
        return MATH_OPS + TABLE_OPS + self.constant_names + PUNCTUATION

    @property
    def step_memory_tokens(self) -> tuple[str, ...]:
        return tuple(f"#{i}" for i in range(self.max_steps))


def build_vocabulary(
    ctx: EvidenceContext,
    max_steps: int,
    constants: Mapping | None = None,
) -> TokenVocabulary:
    """Collect the three token sources from an evidence context.

    Row names that cannot appear in program text (they contain parentheses or
    commas) are excluded, as are input tokens that would collide with special
    or step memory tokens; the three partitions stay disjoint.
    """
    constant_names = tuple(DEFAULT_CONSTANTS if constants is None else constants)
    reserved = set(MATH_OPS + TABLE_OPS + PUNCTUATION) | set(constant_names)
    reserved.update(f"#{i}" for i in range(max_steps))

    numbers = tuple(t for t in ctx.number_tokens() if t not in reserved)
    rows: list[str] = []
    seen = set(reserved)
    for name in ctx.table.row_names:
        if name in seen:
            continue
        try:
            RowName(name)
        except ValueError:
            continue
        seen.add(name)
        rows.append(name)
    return TokenVocabulary(
        input_numbers=numbers,
        input_rows=tuple(rows),
        constant_names=constant_names,
        max_steps=max_steps,
    )


# Decoder phases: the automaton position within `op ( arg {, arg} )` units.
_EXPECT_OP = "op"
_EXPECT_OPEN = "open"
_EXPECT_ARG = "arg"
_EXPECT_SEP = "sep"
_STEP_END = "step-end"


@dataclass(frozen=True)
class DecodeState:
    """An immutable position in the program grammar automaton."""

    phase: str = _EXPECT_OP
    op: str | None = None
    arg_index: int = 0
    step_kinds: tuple[str, ...] = ()
    tokens: tuple[str, ...] = ()

    @classmethod
    def start(cls) -> "DecodeState":
        return cls()

    @property
    def completed_steps(self) -> int:
        return len(self.step_kinds)

    @property
    def is_complete(self) -> bool:
        """True when stopping here yields a parseable program."""
        return self.phase == _STEP_END

    @property
    def program_text(self) -> str:
        return " ".join(self.tokens)


def _numeric_step_refs(state: DecodeState, vocab: TokenVocabulary) -> frozenset[str]:
    limit = min(state.completed_steps, vocab.max_steps)
    return frozenset(
        f"#{i}" for i in range(limit) if state.step_kinds[i] == "number"
    )


def _math_arg_mask(state: DecodeState, vocab: TokenVocabulary) -> frozenset[str]:
    return (
        frozenset(vocab.input_numbers)
        | frozenset(vocab.constant_names)
        | _numeric_step_refs(state, vocab)
    )


def next_token_mask(state: DecodeState, vocab: TokenVocabulary) -> frozenset[str]:
    """Exactly the tokens that keep the prefix extensible to a valid program.

    Operation names are only offered when their argument positions can be
    filled: table operations need at least one row name in the vocabulary.
    An empty mask at a complete state means the walk must stop.
    """
    if state.phase == _EXPECT_OP:
        ops = set()
        if _math_arg_mask(state, vocab):
            ops.update(MATH_OPS)
        if vocab.input_rows:
            ops.update(TABLE_OPS)
        return frozenset(ops)
    if state.phase == _EXPECT_OPEN:
        return frozenset(("(",))
    if state.phase == _EXPECT_ARG:
        if state.op in TABLE_OPS:
            return frozenset(vocab.input_rows)
        return _math_arg_mask(state, vocab)
    if state.phase == _EXPECT_SEP:
        if state.arg_index + 1 < arity(state.op):
            return frozenset((",",))
        return frozenset((")",))
    if state.phase == _STEP_END:
        if state.completed_steps < vocab.max_steps:
            return frozenset((",",))
        return frozenset()
    raise AssertionError(f"unreachable phase {state.phase!r}")


def advance(state: DecodeState, token: str, vocab: TokenVocabulary) -> DecodeState:
    """Consume one token; raises IllegalToken when it is outside the mask."""
    if token not in next_token_mask(state, vocab):
        raise IllegalToken(f"token {token!r} is not allowed in phase {state.phase!r}")
    tokens = state.tokens + (token,)
    if state.phase == _EXPECT_OP:
        return replace(state, phase=_EXPECT_OPEN, op=token, arg_index=0, tokens=tokens)
    if state.phase == _EXPECT_OPEN:
        return replace(state, phase=_EXPECT_ARG, tokens=tokens)
    if state.phase == _EXPECT_ARG:
        return replace(state, phase=_EXPECT_SEP, tokens=tokens)
    if state.phase == _EXPECT_SEP:
        if token == ",":
            return replace(state, phase=_EXPECT_ARG, arg_index=state.arg_index + 1, tokens=tokens)
        return replace(
            state,
            phase=_STEP_END,
            op=None,
            arg_index=0,
            step_kinds=state.step_kinds + (result_kind(state.op),),
            tokens=tokens,
        )
    # _STEP_END: the only legal token is "," starting a new step.
    return replace(state, phase=_EXPECT_OP, tokens=tokens)


def replay(tokens: Iterable[str], vocab: TokenVocabulary) -> DecodeState:
    """Advance through a full token sequence, enforcing the mask at each step."""
    state = DecodeState.start()
    for token in tokens:
        state = advance(state, token, vocab)
    return state
