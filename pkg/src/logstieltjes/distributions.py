"""Distributions on the nonnegative integers and the lattice ``Y = a^X``.

Every distribution is described by unnormalized weights ``w_j`` (exact
rationals whenever the parameters are) and a normalizing constant ``C``
with ``p_j = C w_j``.  Tails are certified from an upper bound on the
weight ratio ``sup_{i >= j} w_{i+1} / w_i``, never extrapolated.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

from .errors import DomainError, NonConvergent, SupportError
from .numeric import (
    DEFAULT_BITS,
    DEFAULT_POLICY,
    Certified,
    PrecisionPolicy,
    Scalar,
    ScalarLike,
    as_scalar,
    escalate,
    format_rational,
    parse_rational,
    sum_with_tail,
    upper_bound,
)
from .qseries import BaseParam, QParam, q_exponential, q_factorial, q_pochhammer


class DiscretePMF:
    """Base class: weights, their ratios, and a cached normalizing constant."""

    kind = "abstract"

    def __init__(self):
        self._weights: List[Scalar] = []
        self._norm_cache: Dict[int, Scalar] = {}

    # subclasses provide these two
    def _first_weight(self) -> Scalar:
        raise NotImplementedError

    def weight_ratio(self, j: int) -> Scalar:
        """``w_{j+1} / w_j``; raises :class:`SupportError` if ``w_j = 0``."""
        raise NotImplementedError

    def ratio_bound(self, j: int) -> Optional[Scalar]:
        """Upper bound on ``w_{i+1}/w_i`` for every ``i >= j`` (``None`` if unknown)."""
        return None

    def _normalizer(self, prec: int) -> Scalar:
        raise NotImplementedError

    @property
    def support_size(self) -> Optional[int]:
        return None

    @property
    def params(self) -> Dict[str, Scalar]:
        return {}

    def weight(self, j: int) -> Scalar:
        if j < 0:
            raise DomainError("index must be nonnegative")
        size = self.support_size
        if size is not None and j >= size:
            return Scalar(0)
        if not self._weights:
            self._weights.append(self._first_weight())
        while len(self._weights) <= j:
            i = len(self._weights) - 1
            self._weights.append(self._weights[i] * self.weight_ratio(i))
        return self._weights[j]

    def normalizer(self, prec: int = DEFAULT_BITS) -> Scalar:
        """The constant ``C`` with ``p_j = C w_j``, as an enclosing ball (or exact)."""
        if prec not in self._norm_cache:
            self._norm_cache[prec] = self._normalizer(prec)
        return self._norm_cache[prec]

    def weight_tail(self, n: int, z: ScalarLike = 1) -> Optional[Fraction]:
        """Bound on ``sum_{j > n} w_j z^j`` for ``z >= 0``, or ``None`` if not yet provable."""
        z = as_scalar(z)
        size = self.support_size
        if size is not None and n >= size - 1:
            return Fraction(0)
        rho = self.ratio_bound(n)
        if rho is None:
            return None
        rz = upper_bound(rho) * z.upper
        if rz >= 1:
            return None
        head = self.weight(n).abs_upper() * z.upper**n
        return head * rz / (1 - rz)

    def tail_certificate(self, n: int, prec: int = DEFAULT_BITS) -> Optional[Fraction]:
        """Upper bound on ``sum_{j > n} p_j``."""
        wt = self.weight_tail(n)
        if wt is None:
            return None
        return wt * self.normalizer(prec).upper

    def to_json(self) -> dict:
        raise NotImplementedError


def _positive(x: ScalarLike, name: str) -> Scalar:
    x = as_scalar(x)
    if not x.lower > 0:
        raise DomainError(f"{name} must be positive, got {x}")
    return x


class Poisson(DiscretePMF):
    kind = "poisson"

    def __init__(self, lam: ScalarLike):
        super().__init__()
        self.lam = _positive(lam, "lambda")

    def __repr__(self):
        return f"Poisson(lam={self.lam})"

    @property
    def params(self):
        return {"lambda": self.lam}

    def _first_weight(self):
        return Scalar(1)

    def weight_ratio(self, j):
        return self.lam / (j + 1)

    def ratio_bound(self, j):
        return self.weight_ratio(j)

    def _normalizer(self, prec):
        return (-self.lam).exp(prec)

    def to_json(self):
        return {"kind": "poisson", "lambda": _scalar_json(self.lam)}


class Heine(DiscretePMF):
    """Heine distribution: ``p_j = e_q(-lam) q^(j(j-1)/2) lam^j / [j]_q!``."""

    kind = "heine"

    def __init__(self, lam: ScalarLike, q: Union[QParam, ScalarLike]):
        super().__init__()
        self.lam = _positive(lam, "lambda")
        self.qparam = q if isinstance(q, QParam) else QParam(as_scalar(q))
        self.q = self.qparam.q

    def __repr__(self):
        return f"Heine(lam={self.lam}, q={self.q})"

    @property
    def params(self):
        return {"lambda": self.lam, "q": self.q}

    def _first_weight(self):
        return Scalar(1)

    def weight_ratio(self, j):
        q = self.q
        return q**j * self.lam * (1 - q) / (1 - q ** (j + 1))

    def ratio_bound(self, j):
        # the ratio is decreasing in j
        return self.weight_ratio(j)

    def weight_qfactorial_form(self, j: int) -> Scalar:
        return self.q ** (j * (j - 1) // 2) * self.lam**j / q_factorial(self.qparam, j)

    def weight_pochhammer_form(self, j: int) -> Scalar:
        q = self.q
        return q ** (j * (j - 1) // 2) * (self.lam * (1 - q)) ** j / q_pochhammer(self.qparam, j)

    def _normalizer(self, prec):
        # guard bits absorb rounding over the ~1/(1-q) factors
        res = q_exponential(self.qparam, -self.lam, Fraction(1, 2 ** (prec - 8)), prec=prec + 32)
        return res.enclosure()

    def to_json(self):
        return {"kind": "heine", "lambda": _scalar_json(self.lam), "q": _scalar_json(self.q)}


class Table(DiscretePMF):
    """Weights given by a finite list, a list with a geometric tail, or a rule.

    ``values`` lists ``w_0..w_{m-1}``.  With ``geometric_ratio=r`` and
    ``geometric_from=n`` the weights continue as ``w_j = w_n r^(j-n)`` for
    ``j > n``.  A ``rule`` maps ``j`` to ``w_j`` and needs ``rule_ratio_bound``
    to certify tails.
    """

    kind = "table"

    def __init__(
        self,
        values: Optional[Sequence[ScalarLike]] = None,
        *,
        geometric_ratio: Optional[ScalarLike] = None,
        geometric_from: Optional[int] = None,
        rule: Optional[Callable[[int], ScalarLike]] = None,
        rule_ratio_bound: Optional[Callable[[int], ScalarLike]] = None,
        name: Optional[str] = None,
    ):
        super().__init__()
        if (values is None) == (rule is None):
            raise DomainError("give exactly one of values or rule")
        self.name = name
        self.rule = rule
        self.rule_ratio_bound = rule_ratio_bound
        self.values = [as_scalar(v) for v in values] if values is not None else None
        self.geometric_ratio = as_scalar(geometric_ratio) if geometric_ratio is not None else None
        self.geometric_from = geometric_from
        if self.values is not None:
            if not self.values:
                raise DomainError("empty table")
            if any(v.sign() == -1 for v in self.values):
                raise DomainError("table weights must be nonnegative")
            if self.geometric_ratio is not None:
                self._check_geometric()

    def _check_geometric(self):
        r, n = self.geometric_ratio, self.geometric_from
        if n is None:
            n = self.geometric_from = len(self.values) - 1
        if not (r.lower > 0 and r.upper < 1):
            raise DomainError("geometric tail ratio must lie in (0, 1)")
        if not 0 <= n < len(self.values):
            raise DomainError("geometric tail must start at a listed index")
        if self.values[n].sign() != 1:
            raise DomainError("geometric tail must start at a positive weight")
        for j in range(n + 1, len(self.values)):
            if self.values[j] != self.values[n] * r ** (j - n):
                raise DomainError(f"listed weight {j} disagrees with the geometric tail")

    def __repr__(self):
        if self.name:
            return f"Table({self.name})"
        return f"Table(values={[str(v) for v in self.values or []]})"

    @property
    def support_size(self):
        if self.values is not None and self.geometric_ratio is None:
            return len(self.values)
        return None

    def weight(self, j):
        if j < 0:
            raise DomainError("index must be nonnegative")
        if self.rule is not None:
            while len(self._weights) <= j:
                w = as_scalar(self.rule(len(self._weights)))
                if w.sign() == -1:
                    raise DomainError("rule produced a negative weight")
                self._weights.append(w)
            return self._weights[j]
        if j < len(self.values):
            return self.values[j]
        if self.geometric_ratio is None:
            return Scalar(0)
        n = self.geometric_from
        return self.values[n] * self.geometric_ratio ** (j - n)

    def weight_ratio(self, j):
        w = self.weight(j)
        if w.sign() == 0:
            raise SupportError(f"weight {j} is zero")
        return self.weight(j + 1) / w

    def ratio_bound(self, j):
        if self.rule is not None:
            if self.rule_ratio_bound is None:
                return None
            return as_scalar(self.rule_ratio_bound(j))
        if self.geometric_ratio is None:
            size = len(self.values)
            if j >= size - 1:
                return Scalar(0)
            return None
        n = self.geometric_from
        if j >= n:
            return self.geometric_ratio
        ratios = [self.weight_ratio(i) for i in range(j, n)]
        best = self.geometric_ratio
        for r in ratios:
            best = Scalar(max(best.upper, r.upper))
        return best

    def _total(self, prec: int) -> Scalar:
        if self.values is not None:
            total = Scalar(0)
            for v in self.values[: (self.geometric_from + 1) if self.geometric_ratio is not None else None]:
                total = total + v
            if self.geometric_ratio is not None:
                r = self.geometric_ratio
                total = total + self.values[self.geometric_from] * r / (1 - r)
            return total
        res = escalate(
            lambda bits: sum_with_tail(
                lambda j: self.weight(j).to_approx(bits),
                self.weight_tail,
                Fraction(1, 2 ** (prec - 8)),
            ),
            PrecisionPolicy(initial_bits=prec, max_bits=4 * prec, target_width=Fraction(1, 2 ** (prec - 8))),
        )
        return res.enclosure()

    def _normalizer(self, prec):
        total = self._total(prec)
        if total.sign() != 1:
            raise DomainError("table weights sum to zero")
        return 1 / total

    def to_json(self):
        if self.values is None:
            raise DomainError("rule tables have no JSON form")
        out = {"kind": "table", "values": [_scalar_json(v) for v in self.values]}
        if self.geometric_ratio is not None:
            out["tail"] = {
                "type": "geometric",
                "ratio": _scalar_json(self.geometric_ratio),
                "from": self.geometric_from,
            }
        return out


def _scalar_json(x: Scalar) -> str:
    return format_rational(x.value) if x.is_exact else x.to_decimal(40)


@dataclass(frozen=True)
class LogTransformSpec:
    """The map ``X -> Y = a^X`` with ``a > 1``; ``Y`` lives on ``{a^j}``."""

    base: BaseParam

    def __post_init__(self):
        if not isinstance(self.base, BaseParam):
            object.__setattr__(self, "base", BaseParam(as_scalar(self.base)))

    @property
    def a(self) -> Scalar:
        return self.base.a

    def support_point(self, j: int) -> Scalar:
        return self.a**j


# -- operations -------------------------------------------------------------


def pmf(d: DiscretePMF, j: int, target: Union[Fraction, str] = Fraction(1, 10**30),
        policy: PrecisionPolicy = DEFAULT_POLICY) -> Certified:
    """``p_j`` with a certified bound; normalizing constants make it a ball in general."""
    target = parse_rational(target) if isinstance(target, str) else Fraction(target)
    w = d.weight(j)

    def compute(bits):
        c = d.normalizer(bits)
        value = c * w
        return Certified(value, value.radius, j)

    return escalate(compute, _with_target(policy, target))


def log_pmf(d: DiscretePMF, j: int, prec: int = DEFAULT_BITS) -> Scalar:
    """``ln p_j`` as a ball; the weight is never materialized as a float."""
    w = d.weight(j)
    if w.sign() == 0:
        raise SupportError(f"p_{j} = 0 has no logarithm")
    if w.sign() is None:
        raise SupportError(f"p_{j} is not certified positive")
    return w.log(prec) + d.normalizer(prec).log(prec)


def _with_target(policy: PrecisionPolicy, target: Fraction) -> PrecisionPolicy:
    return PrecisionPolicy(policy.initial_bits, policy.max_bits, policy.escalation_factor, target)


def _weight_series(d: DiscretePMF, z: Scalar, target: Fraction, bits: int, relative: bool) -> Certified:
    zb = z.to_approx(bits)
    state = {"j": -1, "term": None}

    def term(j):
        # terms built by ratio recurrence in ball arithmetic
        if j == 0:
            t = d.weight(0).to_approx(bits)
        elif state["term"].sign() == 0:
            t = d.weight(j).to_approx(bits) * zb**j
        else:
            t = state["term"] * d.weight_ratio(j - 1).to_approx(bits) * zb
        state["j"], state["term"] = j, t
        return t

    def tail(n):
        return d.weight_tail(n, z)

    if relative:
        return sum_with_tail(term, tail, Fraction(1, 10**300), rel_target=target)
    return sum_with_tail(term, tail, target)


def pgf(d: DiscretePMF, z: ScalarLike, target: Union[Fraction, str] = Fraction(1, 10**30), *,
        method: str = "auto", relative: bool = False,
        policy: PrecisionPolicy = DEFAULT_POLICY) -> Certified:
    """The probability generating function ``f(z) = sum p_j z^j`` for ``z >= 0``.

    ``method`` is ``"series"``, ``"closed"`` (Poisson's exponential or the
    Heine product) or ``"auto"`` (closed form for Poisson, series otherwise).
    With ``relative=True`` the target is relative to ``f(z)``.
    """
    z = as_scalar(z)
    if z.sign() == -1 or z.sign() is None:
        raise DomainError("pgf is evaluated only at z >= 0")
    target = parse_rational(target) if isinstance(target, str) else Fraction(target)
    if method == "auto":
        method = "closed" if isinstance(d, Poisson) else "series"
    if method == "closed":
        if isinstance(d, Poisson):
            def compute(bits):
                v = (d.lam * (z - 1)).exp(bits)
                return Certified(v, v.radius)
        elif isinstance(d, Heine):
            def compute(bits):
                return heine_pgf_product(d, z, target if not relative else Fraction(1, 2**bits), bits)
        else:
            raise DomainError(f"no closed form for {d.kind}")
    elif method == "series":
        def compute(bits):
            inner_target = target / 4 / max(d.normalizer(bits).upper, Fraction(1))
            s = _weight_series(d, z, inner_target if not relative else target / 4, bits, relative)
            value = d.normalizer(bits) * s.enclosure()
            return Certified(value, value.radius, s.last_index)
    else:
        raise DomainError(f"unknown method {method!r}")

    if relative:
        def width(res):
            lo = res.value.abs_lower()
            return res.bound / lo if lo else Fraction(10**9)
        return escalate(compute, _with_target(policy, target), width=width)
    return escalate(compute, _with_target(policy, target))


def log_pgf(d: DiscretePMF, z: ScalarLike, rel_target: Fraction = Fraction(1, 10**12),
            prec: int = DEFAULT_BITS) -> Scalar:
    """``ln f(z)`` as a ball; Poisson uses ``lam (z - 1)`` so huge ``z`` stays cheap."""
    z = as_scalar(z)
    if isinstance(d, Poisson):
        return (d.lam * (z - 1)).to_approx(prec)
    return pgf(d, z, rel_target, relative=True).enclosure().log(prec)


def heine_pgf_product(d: Heine, z: ScalarLike, target: Fraction, prec: int = DEFAULT_BITS) -> Certified:
    """``e_q(-lam) * prod_{j>=0} (1 + lam(1-q) q^j z)``, the product form of the Heine pgf.

    The product over ``j`` is ``1 / e_q(-lam z)`` evaluated with the same
    certified truncation as :func:`q_exponential`.
    """
    z = as_scalar(z)
    c = d.normalizer(prec)
    if z.sign() == 0:
        return Certified(c, c.radius)
    inv = q_exponential(d.qparam, -d.lam * z, Fraction(1, 2 ** (prec - 8)), prec=prec + 32, relative=True)
    value = c / inv.enclosure()
    return Certified(value, value.radius)


def moment_of_Y(d: DiscretePMF, t: LogTransformSpec, k: int,
                target: Union[Fraction, str] = Fraction(1, 10**30), **kwargs) -> Certified:
    """``E[Y^k] = f(a^k)``."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        return Certified(Scalar(1), Fraction(0))
    return pgf(d, t.a**k, target, **kwargs)


class Outcome(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass
class LogConcavityReport:
    outcome: Outcome
    horizon: int
    first_violation: Optional[int] = None
    inconclusive: List[int] = field(default_factory=list)
    exact_fallbacks: int = 0
    prec: int = 256

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "horizon": self.horizon,
            "first_violation": self.first_violation,
            "inconclusive": self.inconclusive,
            "exact_fallbacks": self.exact_fallbacks,
            "prec": self.prec,
        }


def check_log_concavity(d: DiscretePMF, horizon: int, prec: int = 256) -> LogConcavityReport:
    """Test ``p_j^2 >= p_{j-1} p_{j+1}`` for ``1 <= j <= horizon``.

    The comparison runs on ``2 ln w_j - ln w_{j-1} - ln w_{j+1}`` as a ball.
    An overlapping ball falls back to exact rational comparison when all
    three weights are exact; otherwise the index is reported inconclusive.
    """
    if horizon < 1:
        raise DomainError("horizon must be at least 1")
    report = LogConcavityReport(Outcome.PASS, horizon, prec=prec)
    logs: Dict[int, Optional[Scalar]] = {}

    def log_w(j):
        if j not in logs:
            w = d.weight(j)
            logs[j] = None if w.sign() == 0 else w.log(prec)
        return logs[j]

    for j in range(1, horizon + 1):
        lo, mid, hi = log_w(j - 1), log_w(j), log_w(j + 1)
        if lo is None or hi is None:
            continue
        if mid is None:
            report.outcome, report.first_violation = Outcome.FAIL, j
            return report
        sign = (2 * mid - lo - hi).sign()
        if sign is None:
            w0, w1, w2 = d.weight(j - 1), d.weight(j), d.weight(j + 1)
            if w0.is_exact and w1.is_exact and w2.is_exact:
                report.exact_fallbacks += 1
                sign = 1 if w1.value**2 >= w0.value * w2.value else -1
        if sign is None:
            report.inconclusive.append(j)
        elif sign < 0:
            report.outcome, report.first_violation = Outcome.FAIL, j
            return report
    if report.inconclusive:
        report.outcome = Outcome.INCONCLUSIVE
    return report


# -- JSON distribution specs ------------------------------------------------


def from_json(spec: Union[str, Mapping]) -> DiscretePMF:
    """Build a distribution from its JSON description.

    ``{"kind": "heine"|"poisson"|"table", "lambda": "p/q", "q": "p/q",
    "values": [...], "tail": {"type": "geometric", "ratio": "p/q", "from": n}}``
    """
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise DomainError(f"distribution spec is not valid JSON: {exc}") from exc
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise DomainError("distribution spec needs a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "poisson":
            return Poisson(parse_rational(str(spec["lambda"])))
        if kind == "heine":
            return Heine(parse_rational(str(spec["lambda"])), parse_rational(str(spec["q"])))
        if kind == "table":
            values = [parse_rational(str(v)) for v in spec["values"]]
            tail = spec.get("tail")
            if tail is None:
                return Table(values)
            if tail.get("type") != "geometric":
                raise DomainError(f"unsupported tail type {tail.get('type')!r}")
            return Table(values, geometric_ratio=parse_rational(str(tail["ratio"])),
                         geometric_from=int(tail.get("from", len(values) - 1)))
    except KeyError as exc:
        raise DomainError(f"distribution spec missing field {exc}") from exc
    raise DomainError(f"unknown distribution kind {kind!r}")
