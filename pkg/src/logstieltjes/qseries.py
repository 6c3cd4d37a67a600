"""q-Pochhammer symbols, q-factorials, the q-exponential and Euler's product.

Finite products are evaluated left to right in the order of their index, so
ball radii are reproducible run to run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import List, NamedTuple, Optional, Union

from .errors import ConditioningWarning, DomainError, ModeError, NonConvergent, PrecisionExhausted
from .numeric import DEFAULT_BITS, Certified, Scalar, ScalarLike, as_scalar, upper_bound

# closer to 1 than this and truncation depth of infinite products gets large
CONDITIONING_GAP = Fraction(1, 2**16)


def _bits_for(target: Fraction) -> int:
    # enough bits that rounding stays well below an absolute target of order 1
    return max(DEFAULT_BITS, (1 / Fraction(target)).__ceil__().bit_length() + 32)


@dataclass(frozen=True)
class QParam:
    """A base ``0 < q < 1``."""

    q: Scalar

    def __post_init__(self):
        q = as_scalar(self.q)
        object.__setattr__(self, "q", q)
        if not (q.lower > 0 and q.upper < 1):
            raise DomainError(f"q must lie strictly in (0, 1), got {q}")
        if 1 - q.upper < CONDITIONING_GAP:
            warnings.warn(
                f"q = {q} is within 2^-16 of 1; infinite products need ~1/(1-q) factors",
                ConditioningWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class BaseParam:
    """A base ``a > 1`` of the lattice ``{a^j}``."""

    a: Scalar

    def __post_init__(self):
        a = as_scalar(self.a)
        object.__setattr__(self, "a", a)
        if not a.lower > 1:
            raise DomainError(f"a must exceed 1, got {a}")

    @property
    def inverse(self) -> QParam:
        """``1/a`` as a q-parameter, the base of ``(1/a; 1/a)_j``."""
        return QParam(1 / self.a)


def _q(q: Union[QParam, ScalarLike]) -> Scalar:
    return q.q if isinstance(q, QParam) else QParam(as_scalar(q)).q


def _a(a: Union[BaseParam, ScalarLike]) -> Scalar:
    return a.a if isinstance(a, BaseParam) else BaseParam(as_scalar(a)).a


def q_pochhammer(q: Union[QParam, ScalarLike], j: int) -> Scalar:
    """``(q; q)_j``, the product of ``1 - q^s`` for ``s = 1..j``."""
    if j < 0:
        raise DomainError("j must be nonnegative")
    q = _q(q)
    acc, power = Scalar(1), Scalar(1)
    for _ in range(j):
        power = power * q
        acc = acc * (1 - power)
    return acc


def pochhammer_sequence(q: Union[QParam, ScalarLike], n: int) -> List[Scalar]:
    """``[(q;q)_0, ..., (q;q)_n]`` built by the recurrence."""
    q = _q(q)
    out, acc, power = [Scalar(1)], Scalar(1), Scalar(1)
    for _ in range(n):
        power = power * q
        acc = acc * (1 - power)
        out.append(acc)
    return out


def q_factorial(q: Union[QParam, ScalarLike], j: int) -> Scalar:
    """``[j]_q! = (q;q)_j / (1-q)^j``."""
    q = _q(q)
    return q_pochhammer(q, j) / (1 - q) ** j


def _product_with_tail(factor, tail_bound, target, prec, index_cap, relative=False):
    """Multiply ``factor(0) * factor(1) * ...`` until ``tail_bound`` certifies it.

    ``tail_bound(N, partial)`` bounds ``|full product - partial|`` where
    ``partial`` is the product of the first ``N`` factors.  The bound is
    only tried at sparse checkpoints past ``N = 32``, so the product may run
    about 6% longer than the first certifiable ``N``.  With ``relative`` the
    target scales with the partial product.
    """
    acc = Scalar(1).to_approx(prec)
    for n in range(index_cap + 1):
        if n >= 32 and n % (n >> 4):
            acc = acc * factor(n)
            continue
        goal = target * acc.abs_lower() if relative else target
        if acc.radius > goal:
            raise PrecisionExhausted(f"rounding error exceeds {float(goal):.3g} at {prec} bits")
        tb = tail_bound(n, acc)
        if tb is not None and tb + acc.radius <= goal:
            return Certified(acc, tb + acc.radius, n - 1)
        acc = acc * factor(n)
    raise NonConvergent(f"product not certified within {index_cap} factors")


def q_pochhammer_inf(
    q: Union[QParam, ScalarLike],
    target: Union[Fraction, str] = Fraction(1, 10**30),
    prec: Optional[int] = None,
    index_cap: int = 10**7,
) -> Certified:
    """``(q; q)_inf`` with a certified truncation bound.

    After ``N`` factors the remaining product lies in ``[exp(-T), 1]`` with
    ``T = q^(N+1) / ((1-q)(1-q^(N+1)))``, from ``ln(1-x) >= -x/(1-x)``.  Since
    the partial product is at most 1, the absolute error is at most ``T``.
    """
    q = _q(q)
    target = Fraction(target)
    prec = prec or _bits_for(target)
    qb = q.to_approx(64)

    def tail(n, partial):
        qn = qb ** (n + 1)
        return upper_bound(qn / ((1 - qb) * (1 - qn)))

    return _product_with_tail(lambda n: 1 - q.to_approx(prec) ** (n + 1), tail, target, prec, index_cap)


def q_exponential(
    q: Union[QParam, ScalarLike],
    t: ScalarLike,
    target: Union[Fraction, str] = Fraction(1, 10**30),
    prec: Optional[int] = None,
    index_cap: int = 10**7,
    relative: bool = False,
) -> Certified:
    """``e_q(t)``, the reciprocal of the product of ``1 - t(1-q)q^j`` over ``j >= 0``.

    With ``x = t(1-q)`` the tail product after ``N`` factors is within a
    factor ``exp(+-T)`` of 1, ``T = |x| q^N / ((1-q)(1 - max(x,0) q^N))``.
    With ``relative=True`` the target is relative to ``e_q(t)``.
    """
    q, t = _q(q), as_scalar(t)
    target = Fraction(target)
    if not (t * (1 - q)).upper < 1:
        raise DomainError(f"e_q(t) needs t < 1/(1-q); got t = {t}")
    prec = prec or _bits_for(target)
    x = (t * (1 - q)).to_approx(prec)
    q_hi = q.to_approx(prec)
    x64, q64 = x.to_approx(64), q.to_approx(64)
    x_pos = Scalar(max(x64.upper, Fraction(0)))
    x_abs = Scalar(x64.abs_upper())

    def tail(n, partial):
        qn = q64**n
        denom = (1 - q64) * (1 - x_pos * qn)
        big_t = x_abs * qn / denom
        return upper_bound(partial.abs_upper() * (big_t.exp() - 1))

    return _product_with_tail(lambda n: 1 / (1 - x * q_hi**n), tail, target, prec, index_cap, relative)


def euler_product(a: Union[BaseParam, ScalarLike], t: ScalarLike, terms: int) -> Scalar:
    """``prod_{s=0}^{terms-1} (1 - t / a^s)``, the truncated product whose zeros are ``a^k``."""
    if terms < 1:
        raise DomainError("terms must be positive")
    a, t = _a(a), as_scalar(t)
    acc, scale = Scalar(1), Scalar(1)
    for _ in range(terms):
        acc = acc * (1 - t / scale)
        scale = scale * a
    return acc


def gaussian_binomial(q: Union[QParam, ScalarLike], n: int, j: int) -> Scalar:
    if not 0 <= j <= n:
        raise IndexError(f"need 0 <= j <= n, got j={j}, n={n}")
    poch = pochhammer_sequence(q, n)
    return poch[n] / (poch[j] * poch[n - j])


class EulerIdentityReport(NamedTuple):
    q: Fraction
    t: Fraction
    n: int
    product_side: Fraction
    series_side: Fraction
    equal: bool


def verify_euler_identity(q: ScalarLike, t: ScalarLike, n: int) -> EulerIdentityReport:
    """Check the finite q-binomial theorem in exact arithmetic.

    ``prod_{s<n} (1 + q^s t) == sum_{j<=n} q^(j(j-1)/2) [n choose j]_q t^j``.
    """
    q, t = as_scalar(q), as_scalar(t)
    if not (q.is_exact and t.is_exact):
        raise ModeError("the Euler identity check needs exact rationals")
    if n < 1:
        raise DomainError("n must be positive")
    qv, tv = q.value, t.value
    QParam(q)
    lhs, power = Fraction(1), Fraction(1)
    for _ in range(n):
        lhs *= 1 + power * tv
        power *= qv
    poch = [p.value for p in pochhammer_sequence(q, n)]
    rhs = sum(
        qv ** (j * (j - 1) // 2) * poch[n] / (poch[j] * poch[n - j]) * tv**j
        for j in range(n + 1)
    )
    return EulerIdentityReport(qv, tv, n, lhs, rhs, lhs == rhs)
