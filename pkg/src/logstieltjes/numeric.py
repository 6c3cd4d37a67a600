"""Two-mode scalars and certified series summation.

A :class:`Scalar` is either an exact rational (backed by
:class:`fractions.Fraction`) or a midpoint-radius ball at a working precision
of ``prec`` bits (backed by Arb balls from python-flint).  Ball arithmetic is
rigorous: every result encloses the exact result of the operation applied to
any points of the operand balls.
"""

from __future__ import annotations

import enum
import math
from contextlib import contextmanager
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from itertools import count
from numbers import Rational
from typing import Callable, Iterable, Iterator, NamedTuple, Optional, Union

import flint
from flint import arb, fmpq

from .errors import (
    DomainError,
    IndeterminateComparison,
    ModeError,
    NonConvergent,
    PrecisionExhausted,
)

DEFAULT_BITS = 128

ScalarLike = Union["Scalar", int, Fraction, str]


class Mode(enum.Enum):
    EXACT = "exact"
    APPROX = "approx"


@contextmanager
def working_precision(bits: int) -> Iterator[None]:
    """Temporarily set the Arb working precision (global to flint)."""
    old = flint.ctx.prec
    flint.ctx.prec = bits
    try:
        yield
    finally:
        flint.ctx.prec = old


def parse_rational(text: Union[str, int, Fraction, Decimal]) -> Fraction:
    """Parse ``"p/q"``, integer or decimal notation into an exact rational.

    Decimal strings such as ``"0.3"`` or ``"1e-20"`` are converted exactly.
    """
    if isinstance(text, (int, Fraction, Decimal)):
        return Fraction(text)
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"not a rational number: {text!r}") from exc


def format_rational(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _fmpq(x: Fraction) -> fmpq:
    return fmpq(x.numerator, x.denominator)


def _exact_arb_to_fraction(x: arb) -> Fraction:
    man, exp = x.man_exp()
    man, exp = int(man), int(exp)
    if exp >= 0:
        return Fraction(man << exp)
    return Fraction(man, 1 << -exp)


class Scalar:
    """An exact rational or a certified ball ``mid +/- radius``.

    Operations between two exact scalars stay exact.  Mixing in a ball
    produces a ball at the larger of the operand precisions.
    """

    __slots__ = ("_q", "_b", "_prec")

    def __init__(self, value: Union[ScalarLike, float, Decimal, arb] = 0, prec: Optional[int] = None):
        if isinstance(value, Scalar):
            self._q, self._b, self._prec = value._q, value._b, value._prec
        elif isinstance(value, arb):
            if not value.is_finite():
                raise DomainError("non-finite ball")
            self._q, self._b = None, value
            self._prec = prec or flint.ctx.prec
        elif isinstance(value, str):
            self._q, self._b, self._prec = parse_rational(value), None, None
        elif isinstance(value, (int, Rational, float, Decimal)):
            if isinstance(value, float) and not math.isfinite(value):
                raise DomainError("non-finite float")
            self._q, self._b, self._prec = Fraction(value), None, None
        else:
            raise TypeError(f"cannot build a Scalar from {type(value).__name__}")

    @classmethod
    def ball(cls, mid: Union[Fraction, int], radius: Union[Fraction, int], prec: int = DEFAULT_BITS) -> "Scalar":
        mid, radius = Fraction(mid), Fraction(radius)
        if radius < 0:
            raise DomainError("radius must be nonnegative")
        with working_precision(prec):
            b = arb(_fmpq(mid), _fmpq(radius)) if radius else arb(_fmpq(mid))
        return cls(b, prec)

    # -- inspection ---------------------------------------------------------

    @property
    def mode(self) -> Mode:
        return Mode.EXACT if self._q is not None else Mode.APPROX

    @property
    def is_exact(self) -> bool:
        return self._q is not None

    @property
    def prec(self) -> Optional[int]:
        return self._prec

    @property
    def value(self) -> Fraction:
        if self._q is None:
            raise ModeError("approximate scalar has no exact value")
        return self._q

    def as_arb(self, prec: Optional[int] = None) -> arb:
        if self._q is not None:
            with working_precision(prec or DEFAULT_BITS):
                return arb(_fmpq(self._q))
        return self._b

    @property
    def mid(self) -> Fraction:
        if self._q is not None:
            return self._q
        return _exact_arb_to_fraction(self._b.mid())

    @property
    def radius(self) -> Fraction:
        if self._q is not None:
            return Fraction(0)
        return _exact_arb_to_fraction(self._b.rad())

    @property
    def lower(self) -> Fraction:
        return self.mid - self.radius

    @property
    def upper(self) -> Fraction:
        return self.mid + self.radius

    def abs_upper(self) -> Fraction:
        return max(abs(self.lower), abs(self.upper))

    def abs_lower(self) -> Fraction:
        lo, hi = self.lower, self.upper
        if lo <= 0 <= hi:
            return Fraction(0)
        return min(abs(lo), abs(hi))

    def contains(self, x: Union[ScalarLike, float]) -> bool:
        x = Fraction(x) if not isinstance(x, Scalar) else x
        if isinstance(x, Scalar):
            return self.lower <= x.lower and x.upper <= self.upper
        return self.lower <= x <= self.upper

    def sign(self) -> Optional[int]:
        """Certified sign, or ``None`` when the ball straddles zero."""
        if self._q is not None:
            return (self._q > 0) - (self._q < 0)
        if self._b.is_zero():
            return 0
        if self._b > 0:
            return 1
        if self._b < 0:
            return -1
        return None

    # -- conversion ---------------------------------------------------------

    def to_approx(self, prec: int = DEFAULT_BITS) -> "Scalar":
        if self._q is None:
            return self
        return Scalar(self.as_arb(prec), prec)

    def widen(self, bound: Union[Fraction, int]) -> "Scalar":
        """Return a ball whose radius is enlarged by ``bound``."""
        bound = Fraction(bound)
        if not bound:
            return self
        prec = self._prec or DEFAULT_BITS
        return Scalar.ball(self.mid, self.radius + bound, prec)

    def __float__(self) -> float:
        if self._q is not None:
            return float(self._q)
        return float(self._b.mid())

    def to_decimal(self, digits: int = 20) -> str:
        """Decimal rendering: exact values are rounded, balls show their radius."""
        if self._q is not None:
            with working_precision(max(64, int(digits * 3.33) + 16)):
                return arb(_fmpq(self._q)).str(digits, radius=False)
        return self._b.str(digits, radius=True)

    def __repr__(self) -> str:
        if self._q is not None:
            return f"Scalar({format_rational(self._q)!r})"
        return f"Scalar({self._b.str(20, radius=True)}, prec={self._prec})"

    def __str__(self) -> str:
        if self._q is not None:
            return format_rational(self._q)
        return self._b.str(20, radius=True)

    # -- arithmetic ---------------------------------------------------------

    @staticmethod
    def _coerce(other) -> "Scalar":
        if isinstance(other, Scalar):
            return other
        if isinstance(other, (int, Rational, str)):
            return Scalar(other)
        return NotImplemented

    def _binary(self, other, exact_op, ball_op) -> "Scalar":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self._q is not None and other._q is not None:
            return Scalar(exact_op(self._q, other._q))
        prec = max(p for p in (self._prec, other._prec) if p is not None)
        with working_precision(prec):
            return Scalar(ball_op(self.as_arb(prec), other.as_arb(prec)), prec)

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y, lambda x, y: x + y)

    def __radd__(self, other):
        return self._binary(other, lambda x, y: y + x, lambda x, y: y + x)

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y, lambda x, y: x - y)

    def __rsub__(self, other):
        return self._binary(other, lambda x, y: y - x, lambda x, y: y - x)

    def __mul__(self, other):
        return self._binary(other, lambda x, y: x * y, lambda x, y: x * y)

    def __rmul__(self, other):
        return self._binary(other, lambda x, y: y * x, lambda x, y: y * x)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other.sign() in (0, None):
            raise ZeroDivisionError("division by a scalar that may be zero")
        return self._binary(other, lambda x, y: x / y, lambda x, y: x / y)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other / self

    def __neg__(self) -> "Scalar":
        if self._q is not None:
            return Scalar(-self._q)
        return Scalar(-self._b, self._prec)

    def __pos__(self) -> "Scalar":
        return self

    def __abs__(self) -> "Scalar":
        if self._q is not None:
            return Scalar(abs(self._q))
        with working_precision(self._prec):
            return Scalar(abs(self._b), self._prec)

    def __pow__(self, n: int) -> "Scalar":
        if not isinstance(n, int):
            return NotImplemented
        if self._q is not None:
            return Scalar(self._q**n)
        with working_precision(self._prec):
            return Scalar(self._b**n, self._prec)

    def _unary(self, name: str, prec: Optional[int]) -> "Scalar":
        prec = self._prec or prec or DEFAULT_BITS
        with working_precision(prec):
            return Scalar(getattr(self.as_arb(prec), name)(), prec)

    def log(self, prec: Optional[int] = None) -> "Scalar":
        if self.sign() != 1:
            raise DomainError("logarithm of a scalar not certified positive")
        return self._unary("log", prec)

    def exp(self, prec: Optional[int] = None) -> "Scalar":
        return self._unary("exp", prec)

    # -- comparison ---------------------------------------------------------

    def compare(self, other) -> Optional[int]:
        """Three-valued comparison: -1, 0, 1, or ``None`` if undecidable."""
        other = self._coerce(other)
        if self._q is not None and other._q is not None:
            return (self._q > other._q) - (self._q < other._q)
        if self.upper < other.lower:
            return -1
        if self.lower > other.upper:
            return 1
        if self.radius == 0 and other.radius == 0 and self.mid == other.mid:
            return 0
        return None

    def _ordered(self, other) -> int:
        c = self.compare(other)
        if c is None:
            raise IndeterminateComparison(f"cannot order {self!r} and {other!r}")
        return c

    def __lt__(self, other) -> bool:
        return self._ordered(other) < 0

    def __le__(self, other) -> bool:
        c = self.compare(other)
        if c is None and self.upper <= self._coerce(other).lower:
            return True
        if c is None:
            raise IndeterminateComparison(f"cannot order {self!r} and {other!r}")
        return c <= 0

    def __gt__(self, other) -> bool:
        return self._ordered(other) > 0

    def __ge__(self, other) -> bool:
        c = self.compare(other)
        if c is None and self.lower >= self._coerce(other).upper:
            return True
        if c is None:
            raise IndeterminateComparison(f"cannot order {self!r} and {other!r}")
        return c >= 0

    def __eq__(self, other) -> bool:
        # structural: exact values compare by value, balls by (mid, radius, prec)
        if isinstance(other, (int, Rational)) and not isinstance(other, bool):
            return self._q is not None and self._q == other
        if not isinstance(other, Scalar):
            return NotImplemented
        if self._q is not None or other._q is not None:
            return self._q == other._q and self._b is None and other._b is None
        return (self._prec, self.mid, self.radius) == (other._prec, other.mid, other.radius)

    def __hash__(self) -> int:
        if self._q is not None:
            return hash(self._q)
        return hash((self._prec, self.mid, self.radius))


def as_scalar(x: Union[ScalarLike, float, Decimal]) -> Scalar:
    return x if isinstance(x, Scalar) else Scalar(x)


def upper_bound(x: Union[Scalar, Fraction, int, float, arb]) -> Fraction:
    """An exact rational upper bound for a nonnegative quantity."""
    if isinstance(x, arb):
        x = Scalar(x)
    if isinstance(x, Scalar):
        return x.upper
    return Fraction(x)


@dataclass(frozen=True)
class PrecisionPolicy:
    initial_bits: int = DEFAULT_BITS
    max_bits: int = 8192
    escalation_factor: Fraction = Fraction(2)
    target_width: Fraction = Fraction(1, 10**30)

    def __post_init__(self):
        if self.initial_bits < 2 or self.max_bits < self.initial_bits:
            raise DomainError("need 2 <= initial_bits <= max_bits")
        if Fraction(self.escalation_factor) <= 1:
            raise DomainError("escalation_factor must exceed 1")
        if Fraction(self.target_width) <= 0:
            raise DomainError("target_width must be positive")

    def schedule(self) -> Iterator[int]:
        bits = self.initial_bits
        while True:
            yield bits
            if bits >= self.max_bits:
                return
            bits = min(self.max_bits, math.ceil(bits * Fraction(self.escalation_factor)))


DEFAULT_POLICY = PrecisionPolicy()


class Certified(NamedTuple):
    """A computed value and a bound on its total deviation from the truth.

    ``bound`` covers both truncation and rounding: the true quantity lies
    within ``bound`` of ``value.mid``.
    """

    value: Scalar
    bound: Fraction
    last_index: Optional[int] = None

    def enclosure(self) -> Scalar:
        if self.value.is_exact and not self.bound:
            return self.value
        return Scalar.ball(self.value.mid, self.bound, self.value.prec or DEFAULT_BITS)


def sum_with_tail(
    terms: Union[Callable[[int], ScalarLike], Iterable[ScalarLike]],
    tail_bound: Callable[[int], Optional[Union[Fraction, Scalar, int]]],
    target: Union[Fraction, int, str],
    *,
    rel_target: Optional[Fraction] = None,
    index_cap: int = 100_000,
) -> Certified:
    """Sum a series until a proven tail bound plus rounding drops below ``target``.

    ``tail_bound(N)`` must bound ``|sum_{j > N} term_j|``; it may return
    ``None`` while no bound is available yet.  With ``rel_target`` the
    acceptance threshold is ``max(target, rel_target * |partial sum|)``.
    """
    target = parse_rational(target) if isinstance(target, str) else Fraction(target)
    if target <= 0:
        raise DomainError("target must be positive")
    source = (terms(j) for j in count()) if callable(terms) else iter(terms)
    acc = Scalar(0)
    for j, term in enumerate(source):
        acc = acc + as_scalar(term)
        tb = tail_bound(j)
        if tb is None:
            if j >= index_cap:
                break
            continue
        tb = upper_bound(tb)
        threshold = target
        if rel_target is not None:
            threshold = max(threshold, rel_target * acc.abs_lower())
        rounding = acc.radius
        if tb + rounding <= threshold:
            return Certified(acc, tb + rounding, j)
        if rounding > threshold / 2 and tb <= threshold / 2:
            raise PrecisionExhausted(f"rounding error {float(rounding):.3g} exceeds target at index {j}")
        if j >= index_cap:
            break
    else:
        # finite generator: the sum is complete
        return Certified(acc, acc.radius, None)
    raise NonConvergent(f"tail bound did not reach {float(target):.3g} within {index_cap} terms")


def escalate(
    compute: Callable[[int], Union[Scalar, Certified]],
    policy: PrecisionPolicy = DEFAULT_POLICY,
    width: Optional[Callable[[Union[Scalar, Certified]], Fraction]] = None,
):
    """Rerun ``compute(bits)`` at growing precision until its width is small enough.

    The width of a :class:`Scalar` is its radius and of a :class:`Certified`
    its bound, unless ``width`` is given.
    """
    def default_width(result):
        if isinstance(result, Certified):
            return result.bound
        return result.radius

    width = width or default_width
    last_error = None
    for bits in policy.schedule():
        try:
            result = compute(bits)
        except PrecisionExhausted as exc:
            last_error = exc
            continue
        if width(result) <= Fraction(policy.target_width):
            return result
    raise PrecisionExhausted(f"width target not met at {policy.max_bits} bits") from last_error
