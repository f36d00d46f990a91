"""Program execution over evidence contexts, in exact rational arithmetic.

Every step's result is an exact Fraction (or a bool, for the comparison
operation), so repeated runs and independently written interpreters agree
bit for bit. Errors are raised, never coerced; an erroring prediction simply
scores incorrect during evaluation.
"""

from __future__ import annotations

from decimal import Decimal
from fractions import Fraction
from typing import Mapping, Optional, Union

from .context import EvidenceContext
from .dsl import (
    ALL_OPS,
    TABLE_OPS,
    Argument,
    Constant,
    NumberLiteral,
    Program,
    RowName,
    StepRef,
    constant_value,
)
from .numeric import decimal_places, format_decimal

#: A step result: exact number, or bool from `greater`.
Value = Union[Fraction, bool]

#: Step results indexed by step number, for #n lookups.
StepEnv = list


class ExecutionError(Exception):
    """Base class for runtime program failures."""


class InvalidProgram(ExecutionError):
    """The program is structurally unfit to run (validate would flag it)."""


class DivisionByZero(ExecutionError):
    pass


class RowNotFound(ExecutionError):
    pass


class EmptyNumericRow(ExecutionError):
    pass


class BooleanInArithmetic(ExecutionError):
    """A comparison result was fed into an operation expecting a number."""


class UngroundedNumber(ExecutionError):
    """Strict mode only: a literal that appears nowhere in the evidence."""


class DomainError(ExecutionError):
    """Exponentiation outside the real domain, or beyond representable range."""


def _iroot(n: int, k: int) -> int | None:
    """The exact integer k-th root of n >= 0, or None if n is not a k-th power."""
    if n in (0, 1):
        return n
    if n.bit_length() > 1024:
        return None
    guess = round(n ** (1.0 / k))
    for candidate in (guess - 1, guess, guess + 1):
        if candidate >= 0 and candidate**k == n:
            return candidate
    return None


def power(base: Fraction, exponent: Fraction) -> Fraction:
    """number1 ** number2 with exact results whenever they exist.

    Integer exponents are always exact. Fractional exponents yield the exact
    rational root when one exists; otherwise the result is computed in
    floating point and widened. Negative bases with fractional exponents are
    a DomainError, as is 0 raised to a negative power.
    """
    if exponent.denominator == 1:
        if base == 0 and exponent < 0:
            raise DivisionByZero("0 cannot be raised to a negative power")
        return base ** exponent.numerator
    if base < 0:
        raise DomainError("negative base with a fractional exponent")
    powered = base ** exponent.numerator
    root = exponent.denominator
    num = _iroot(powered.numerator, root)
    den = _iroot(powered.denominator, root)
    if num is not None and den is not None:
        return Fraction(num, den)
    try:
        return Fraction(float(base) ** float(exponent))
    except (OverflowError, ValueError) as exc:
        raise DomainError(f"exponentiation out of range: {exc}") from exc


def aggregate_row(cells: list[Fraction], kind: str) -> Fraction:
    """sum / average / max / min over one row's numeric cells."""
    if not cells:
        raise EmptyNumericRow("the row has no numeric cells")
    if kind == "sum":
        return sum(cells, Fraction(0))
    if kind == "average":
        return sum(cells, Fraction(0)) / len(cells)
    if kind == "max":
        return max(cells)
    if kind == "min":
        return min(cells)
    raise InvalidProgram(f"unknown aggregation {kind!r}")


def resolve_argument(
    arg: Argument,
    ctx: EvidenceContext,
    env: StepEnv,
    *,
    strict_grounding: bool = False,
    constants: Mapping[str, Fraction] | None = None,
) -> Union[Fraction, list[Fraction]]:
    """A literal's value, a constant's value, a step lookup, or a row's cells."""
    if isinstance(arg, NumberLiteral):
        value = Fraction(arg.value)
        if strict_grounding and value not in ctx.number_values:
            raise UngroundedNumber(f"{arg.render()} does not appear in the evidence")
        return value
    if isinstance(arg, Constant):
        value = constant_value(arg.name, constants)
        if value is None:
            raise InvalidProgram(f"unknown constant {arg.name!r}")
        return value
    if isinstance(arg, StepRef):
        if arg.index >= len(env):
            raise InvalidProgram(f"#{arg.index} is not an earlier step")
        result = env[arg.index]
        if isinstance(result, bool):
            raise BooleanInArithmetic(
                f"#{arg.index} is a comparison result and cannot be an operand"
            )
        return result
    if isinstance(arg, RowName):
        index = ctx.table.find_row(arg.name)
        if index is None:
            raise RowNotFound(f"no table row matches {arg.name!r}")
        return ctx.table.numeric_cells(index)
    raise InvalidProgram(f"unsupported argument {arg!r}")


def eval_step(op: str, resolved_args: list) -> Value:
    """Apply one operation to already-resolved arguments."""
    if op in TABLE_OPS:
        if len(resolved_args) != 1 or not isinstance(resolved_args[0], list):
            raise InvalidProgram(f"{op} takes exactly one table row")
        return aggregate_row(resolved_args[0], op.removeprefix("table-"))
    if len(resolved_args) != 2:
        raise InvalidProgram(f"{op} takes exactly two numbers")
    a, b = resolved_args
    if not isinstance(a, Fraction) or not isinstance(b, Fraction):
        raise InvalidProgram(f"{op} takes numbers, got a table row or symbol")
    if op == "add":
        return a + b
    if op == "subtract":
        return a - b
    if op == "multiply":
        return a * b
    if op == "divide":
        if b == 0:
            raise DivisionByZero("division by zero")
        return a / b
    if op == "exp":
        return power(a, b)
    if op == "greater":
        return a > b
    raise InvalidProgram(f"unknown operation {op!r}")


def execute(
    program: Program,
    ctx: Optional[EvidenceContext] = None,
    *,
    strict_grounding: bool = False,
    constants: Mapping[str, Fraction] | None = None,
) -> Value:
    """Run every step in order and return the final step's value.

    The default grounding mode is lenient (literals need not appear in the
    evidence), matching how predictions are scored; strict mode reproduces the
    annotation validator's behavior.
    """
    if ctx is None:
        ctx = EvidenceContext.empty()
    if not program.steps:
        raise InvalidProgram("a program needs at least one step")
    env: StepEnv = []
    for step in program.steps:
        if step.op not in ALL_OPS:
            raise InvalidProgram(f"unknown operation {step.op!r}")
        resolved = [
            resolve_argument(
                arg, ctx, env, strict_grounding=strict_grounding, constants=constants
            )
            for arg in step.args
        ]
        env.append(eval_step(step.op, resolved))
    return env[-1]


def render_value(value: Value) -> str:
    """Serialize a result: booleans as yes/no, rationals as exact decimals.

    Non-terminating rationals render as numerator/denominator to avoid any
    silent rounding; the evaluation layer compares exact values, never text.
    """
    if isinstance(value, bool):
        return "yes" if value else "no"
    places = decimal_places(value)
    if places is None:
        return f"{value.numerator}/{value.denominator}"
    scaled = value * Fraction(10) ** places
    return format_decimal(Decimal(scaled.numerator).scaleb(-places))
