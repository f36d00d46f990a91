"""Seeded random generators and independent oracles used across the suite.

The oracles here deliberately avoid the package's execution and equivalence
machinery: the tree-walking interpreter recomputes every step by recursive
substitution instead of a memoized environment, and the randomized program
oracle evaluates symbolic programs step by step without building, normalizing,
or pruning expression trees. Shared pieces are limited to definitional layers:
quantity parsing, the symbol-identity rule, and the hashed sample-point
convention for uninterpreted operations.
"""

from __future__ import annotations

import re
from decimal import Decimal
from fractions import Fraction
from random import Random

from finprog.context import EvidenceContext, FinTable
from finprog.decoding import DecodeState, TokenVocabulary, advance, next_token_mask
from finprog.dsl import (
    DEFAULT_CONSTANTS,
    MATH_OPS,
    TABLE_OPS,
    Constant,
    NumberLiteral,
    OperationStep,
    Program,
    RowName,
    StepRef,
    is_valid,
    parse_program,
    validate,
)
from finprog.equiv import _hashed_int, pair_symbolize
from finprog.numeric import NotANumber, parse_quantity

_WORDS = (
    "revenue", "income", "assets", "liabilities", "equity", "expense",
    "margin", "shares", "dividend", "segment", "interest", "rate",
    "benefit", "goodwill", "inventory", "backlog", "royalty", "lease",
)

_SENTENCE_SHAPES = (
    "the {w1} of the {w2} segment was {n1} compared with {n2} a year earlier .",
    "{w1} increased to {n1} from {n2} , driven by {w2} .",
    "as of year end , total {w1} was {n1} .",
    "the company recorded {n1} of {w1} and {n2} of {w2} .",
)


def random_number_text(rng: Random) -> str:
    """A written number: plain, decimal, negative, currency, or percent."""
    magnitude = rng.choice((rng.randint(0, 9), rng.randint(10, 999), rng.randint(1000, 99999)))
    if rng.random() < 0.45:
        text = str(magnitude)
    else:
        places = rng.randint(1, 3)
        text = f"{magnitude}.{rng.randint(0, 10 ** places - 1):0{places}d}"
    roll = rng.random()
    if roll < 0.10:
        return f"( {text} )".replace(" ", "")
    if roll < 0.20:
        return f"${text}"
    if roll < 0.30:
        return f"{text}%"
    if roll < 0.36:
        return f"-{text}"
    return text


def random_context(rng: Random) -> EvidenceContext:
    """A small synthetic evidence context with text numbers and a table."""
    sentences = []
    for _ in range(rng.randint(1, 4)):
        shape = rng.choice(_SENTENCE_SHAPES)
        sentences.append(
            shape.format(
                w1=rng.choice(_WORDS),
                w2=rng.choice(_WORDS),
                n1=random_number_text(rng),
                n2=random_number_text(rng),
            )
        )
    columns = rng.randint(1, 3)
    header = ("",) + tuple(str(2015 + i) for i in range(columns))
    used = set()
    rows = []
    for _ in range(rng.randint(1, 4)):
        name = f"{rng.choice(_WORDS)} {rng.choice(_WORDS)}"
        if name in used:
            continue
        used.add(name)
        cells = []
        for _ in range(columns):
            if rng.random() < 0.12:
                cells.append(rng.choice(("n/a", "-", "")))
            else:
                cells.append(random_number_text(rng))
        rows.append((name, tuple(cells)))
    return EvidenceContext.build(sentences, FinTable(header=header, rows=tuple(rows)))


def _literal_pool(ctx: EvidenceContext) -> list[Decimal]:
    values = [Decimal(token) for token in ctx.number_tokens()]
    return values or [Decimal(1)]


def random_program(rng: Random, ctx: EvidenceContext, max_steps: int = 5) -> Program:
    """A structurally valid program grounded in the given context.

    Exponents are kept to small integer literals so all arithmetic stays in
    the rationals and magnitudes remain tractable.
    """
    literals = _literal_pool(ctx)
    small_literals = [
        d for d in literals if d == d.to_integral_value() and abs(d) <= 4
    ]
    exponent_constants = ("const_2", "const_3", "const_4", "const_5", "const_m1")
    rows = [name for name in ctx.table.row_names if name]
    steps: list[OperationStep] = []
    kinds: list[str] = []
    n_steps = rng.randint(1, max_steps)
    for index in range(n_steps):
        ops = list(MATH_OPS)
        if rows:
            ops += list(TABLE_OPS)
        op = rng.choice(ops)
        if op in TABLE_OPS:
            steps.append(OperationStep(op=op, args=(RowName(rng.choice(rows)),)))
            kinds.append("number")
            continue

        def math_arg():
            numeric_refs = [i for i in range(index) if kinds[i] == "number"]
            roll = rng.random()
            if numeric_refs and roll < 0.35:
                return StepRef(rng.choice(numeric_refs))
            if roll < 0.55:
                return Constant(rng.choice(list(DEFAULT_CONSTANTS)))
            return NumberLiteral(rng.choice(literals))

        first = math_arg()
        if op == "exp":
            # keep exponents small and expressible over the vocabulary
            if small_literals and rng.random() < 0.5:
                second: object = NumberLiteral(rng.choice(small_literals))
            else:
                second = Constant(rng.choice(exponent_constants))
        else:
            second = math_arg()
        steps.append(OperationStep(op=op, args=(first, second)))
        kinds.append("bool" if op == "greater" else "number")
    return Program(steps=tuple(steps))


_SYMBOLS = ("a", "b", "c", "d", "e", "f", "g", "h")


def random_symbolic_program(rng: Random, max_steps: int = 5) -> Program:
    """A valid program over free symbols, small literals, and constants."""
    steps: list[OperationStep] = []
    kinds: list[str] = []
    for index in range(rng.randint(1, max_steps)):
        op = rng.choice(MATH_OPS + (TABLE_OPS if rng.random() < 0.15 else ()))
        if op in TABLE_OPS:
            steps.append(OperationStep(op=op, args=(RowName(rng.choice(_SYMBOLS)),)))
            kinds.append("number")
            continue

        def arg():
            numeric_refs = [i for i in range(index) if kinds[i] == "number"]
            roll = rng.random()
            if numeric_refs and roll < 0.4:
                return StepRef(rng.choice(numeric_refs))
            if roll < 0.5:
                return NumberLiteral(Decimal(rng.randint(1, 9)))
            if roll < 0.6:
                return Constant(rng.choice(list(DEFAULT_CONSTANTS)))
            return RowName(rng.choice(_SYMBOLS))

        first = arg()
        second = NumberLiteral(Decimal(rng.randint(-3, 4))) if op == "exp" else arg()
        steps.append(OperationStep(op=op, args=(first, second)))
        kinds.append("bool" if op == "greater" else "number")
    return Program(steps=tuple(steps))


# ---------------------------------------------------------------------------
# independent tree-walking interpreter (oracle for the executor)


class OracleFailure(Exception):
    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(kind)


_NORM_RE = re.compile(r"[^0-9a-z]+")


def _oracle_norm(name: str) -> str:
    return _NORM_RE.sub(" ", name.lower()).strip()


def _oracle_row_cells(ctx: EvidenceContext, name: str) -> list[Fraction]:
    wanted = _oracle_norm(name)
    for row_name, cells in ctx.table.rows:
        if _oracle_norm(row_name) == wanted:
            values = []
            for cell in cells:
                try:
                    values.append(Fraction(parse_quantity(cell).mantissa))
                except NotANumber:
                    pass
            return values
    raise OracleFailure("RowNotFound")


def _oracle_power(base: Fraction, exponent: Fraction) -> Fraction:
    if exponent.denominator != 1:
        raise OracleFailure("DomainError")
    if base == 0 and exponent < 0:
        raise OracleFailure("DivisionByZero")
    result = Fraction(1)
    e = abs(exponent.numerator)
    for _ in range(e):
        result *= base
    return result if exponent >= 0 else Fraction(1) / result


def naive_execute(program: Program, ctx: EvidenceContext):
    """Evaluate each step as a recursively substituted tree, first error wins.

    Returns (value, None) or (None, error_kind), where error kinds use the
    executor's exception class names.
    """

    def eval_step_tree(index: int):
        step = program.steps[index]

        def number_arg(arg):
            if isinstance(arg, NumberLiteral):
                return Fraction(arg.value)
            if isinstance(arg, Constant):
                value = DEFAULT_CONSTANTS.get(arg.name)
                if value is None:
                    raise OracleFailure("InvalidProgram")
                return value
            if isinstance(arg, StepRef):
                inner = eval_step_tree(arg.index)
                if isinstance(inner, bool):
                    raise OracleFailure("BooleanInArithmetic")
                return inner
            raise OracleFailure("InvalidProgram")

        if step.op in TABLE_OPS:
            arg = step.args[0]
            if not isinstance(arg, RowName):
                raise OracleFailure("InvalidProgram")
            cells = _oracle_row_cells(ctx, arg.name)
            if not cells:
                raise OracleFailure("EmptyNumericRow")
            if step.op == "table-sum":
                return sum(cells, Fraction(0))
            if step.op == "table-average":
                return sum(cells, Fraction(0)) / len(cells)
            if step.op == "table-max":
                return max(cells)
            return min(cells)

        left = number_arg(step.args[0])
        right = number_arg(step.args[1])
        if step.op == "add":
            return left + right
        if step.op == "subtract":
            return left - right
        if step.op == "multiply":
            return left * right
        if step.op == "divide":
            if right == 0:
                raise OracleFailure("DivisionByZero")
            return left / right
        if step.op == "exp":
            return _oracle_power(left, right)
        if step.op == "greater":
            return left > right
        raise OracleFailure("InvalidProgram")

    try:
        value = None
        for index in range(len(program.steps)):
            value = eval_step_tree(index)
        return value, None
    except OracleFailure as exc:
        return None, exc.kind


# ---------------------------------------------------------------------------
# pure randomized equivalence oracle (no expressions, no normalization)


class _PointFailure(Exception):
    pass


def _run_symbolic(steps, symbols, values, seed: int, trial: int):
    env = []
    for step in steps:
        resolved = []
        for kind, ref in step.args:
            if kind == "step":
                value = env[ref]
                if isinstance(value, bool):
                    raise _PointFailure()
                resolved.append(value)
            else:
                resolved.append(values[ref])
        if step.op in TABLE_OPS:
            env.append(Fraction(_hashed_int(seed, (trial, "agg", step.op, symbols[step.args[0][1]]))))
            continue
        left, right = resolved
        if step.op == "add":
            env.append(left + right)
        elif step.op == "subtract":
            env.append(left - right)
        elif step.op == "multiply":
            env.append(left * right)
        elif step.op == "divide":
            if right == 0:
                raise _PointFailure()
            env.append(left / right)
        elif step.op == "exp":
            env.append(Fraction(_hashed_int(seed, (trial, "pow", left, right))))
        elif step.op == "greater":
            env.append(left > right)
        else:
            raise _PointFailure()
    return env[-1]


def oracle_equivalent(p1: Program, p2: Program, samples: int = 32, seed: int = 0):
    """Step-by-step randomized comparison; True/False, or None if degenerate.

    Shares only the symbol-identity rule and the hashed point convention with
    the implementation; evaluation itself runs the raw symbolic programs,
    including dead steps (their failures just discard the sample point).
    """
    s1, s2 = pair_symbolize(p1, p2)
    if (s1.steps[-1].op == "greater") != (s2.steps[-1].op == "greater"):
        return False
    agreed = 0
    for trial in range(samples * 20):
        if agreed >= samples:
            break
        values = [Fraction(_hashed_int(seed, (trial, key))) for key in s1.symbols]
        try:
            left = _run_symbolic(s1.steps, s1.symbols, values, seed, trial)
            right = _run_symbolic(s2.steps, s2.symbols, values, seed, trial)
        except _PointFailure:
            continue
        if left != right:
            return False
        agreed += 1
    return True if agreed >= samples else None


def generically_evaluable(program: Program, probes: int = 3, seed: int = 987) -> bool:
    """True when every step evaluates at a few random points (no constant-zero
    denominators or boolean misuse anywhere, including dead steps)."""
    sp, _ = pair_symbolize(program, program)
    for trial in range(probes):
        values = [Fraction(_hashed_int(seed, (trial, key))) for key in sp.symbols]
        try:
            _run_symbolic(sp.steps, sp.symbols, values, seed, trial)
        except _PointFailure:
            return False
    return True


def random_program_pair(rng: Random) -> tuple[Program, Program]:
    """A pair for equivalence testing: related by a mutation, or independent."""
    base = random_symbolic_program(rng)
    while not generically_evaluable(base):
        base = random_symbolic_program(rng)
    roll = rng.random()
    if roll < 0.30:
        other = mutate_preserving(rng, base)
    elif roll < 0.70:
        other = mutate_breaking(rng, base)
    else:
        other = random_symbolic_program(rng)
    if not generically_evaluable(other):
        other = base
    return base, other


def mutate_preserving(rng: Random, program: Program) -> Program:
    """Swap the operands of one commutative step, if any; else copy."""
    candidates = [i for i, s in enumerate(program.steps) if s.op in ("add", "multiply")]
    if not candidates:
        return program
    target = rng.choice(candidates)
    steps = list(program.steps)
    step = steps[target]
    steps[target] = OperationStep(op=step.op, args=(step.args[1], step.args[0]))
    return Program(steps=tuple(steps))


def mutate_breaking(rng: Random, program: Program) -> Program:
    """Change one step's operation; usually breaks equivalence, maybe not."""
    steps = list(program.steps)
    target = rng.randrange(len(steps))
    step = steps[target]
    if step.op in TABLE_OPS:
        replacement = rng.choice([op for op in TABLE_OPS if op != step.op])
    else:
        pool = [op for op in ("add", "subtract", "multiply", "divide") if op != step.op]
        if step.op == "greater" or step.op == "exp":
            return program
        replacement = rng.choice(pool)
    steps[target] = OperationStep(op=replacement, args=step.args)
    return Program(steps=tuple(steps))


def reorder_independent_steps(program: Program) -> Program | None:
    """Swap the first two steps when neither references the other, renumbering
    all later step references consistently.

    Requires at least three steps: swapping within a two-step program would
    change which step is final, changing the program's answer."""
    if len(program.steps) < 3:
        return None
    first, second = program.steps[0], program.steps[1]
    if any(isinstance(a, StepRef) for a in second.args):
        return None

    def renumber(arg):
        if isinstance(arg, StepRef):
            if arg.index == 0:
                return StepRef(1)
            if arg.index == 1:
                return StepRef(0)
        return arg

    rest = [
        OperationStep(op=s.op, args=tuple(renumber(a) for a in s.args))
        for s in program.steps[2:]
    ]
    return Program(steps=(second, first, *rest))


# ---------------------------------------------------------------------------
# mask-guided walks and the brute-force mask oracle


def random_walk(rng: Random, vocab: TokenVocabulary) -> str:
    """Follow masks to a complete program; returns its text."""
    state = DecodeState.start()
    while True:
        mask = next_token_mask(state, vocab)
        if state.is_complete and (not mask or rng.random() < 0.45):
            return state.program_text
        token = rng.choice(sorted(mask))
        state = advance(state, token, vocab)


def _parses_clean(tokens: list[str]) -> bool:
    try:
        program = parse_program(" ".join(tokens))
    except Exception:
        return False
    return is_valid(validate(program))


def bruteforce_next_tokens(
    prefix: list[str], candidates: list[str], finishers: list[str], depth: int = 5
) -> set[str]:
    """Candidate tokens legal after the prefix, judged only by the parser.

    A candidate is legal when some completion (over the small finisher
    alphabet, up to the given depth) parses into a program with no
    context-free diagnostics. Independent of the mask engine.
    """

    def completable(tokens: list[str], remaining: int) -> bool:
        if _parses_clean(tokens):
            return True
        if remaining == 0:
            return False
        return any(completable(tokens + [f], remaining - 1) for f in finishers)

    legal = set()
    for candidate in candidates:
        if completable(prefix + [candidate], depth):
            legal.add(candidate)
    return legal
