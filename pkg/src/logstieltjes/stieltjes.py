"""Perturbations of ``Y = a^X`` built from Euler's product and their Stieltjes classes.

With ``c_j = (-1)^j a^(-j(j-1)/2) / (1/a; 1/a)_j`` the series
``sum_j a^(kj) c_j`` is the expansion of ``prod_{s>=0} (1 - a^k / a^s)`` and
so vanishes for every ``k >= 0``.  The unnormalized perturbation is
``ht_j = c_j / p_j``.  All verification sums use ``c_j`` directly: ``p_j``
cancels, which keeps them exact for rational ``a`` and free of the
``tiny * huge`` products that ``p_j ht_j`` would otherwise involve.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Union

from .distributions import DiscretePMF, Heine, LogTransformSpec, Poisson, pgf
from .errors import DomainError, NoDecayCertificate, RangeError, SupportError
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
)
from .qseries import BaseParam

DEFAULT_SCAN_HORIZON = 200
DEFAULT_RUN_LENGTH = 20


class CancelledTerms:
    """The distribution-free sequence ``c_j``, cached per base ``a``."""

    def __init__(self, a: Scalar):
        self.a = a
        self._c: List[Scalar] = [Scalar(1)]

    def __getitem__(self, j: int) -> Scalar:
        a = self.a
        while len(self._c) <= j:
            i = len(self._c) - 1
            # c_{i+1} / c_i = -a^(-i) / (1 - a^(-(i+1)))
            self._c.append(-self._c[i] / (a**i * (1 - 1 / a ** (i + 1))))
        return self._c[j]


_cancelled_cache: Dict[Scalar, CancelledTerms] = {}


def cancelled_terms(a: Scalar) -> CancelledTerms:
    if a not in _cancelled_cache:
        _cancelled_cache[a] = CancelledTerms(a)
    return _cancelled_cache[a]


def _decay_proven(d: DiscretePMF, a: Scalar, j: int) -> bool:
    """Prove ``|ht_{i+1}| <= |ht_i|`` for every ``i >= j`` from the family's closed form."""
    if isinstance(d, Heine):
        # ratio <= (aq)^(-i) / (lam (1-q)) when aq >= 1, nonincreasing in i
        aq = a * d.q
        if aq.compare(1) not in (0, 1):
            return False
        bound = 1 / (aq**j * d.lam * (1 - d.q))
        return bound.compare(1) in (-1, 0)
    if isinstance(d, Poisson):
        # ratio = a^(-i) (i+1) / (lam (1 - a^(-(i+1)))), nonincreasing once a >= (i+2)/(i+1)
        if a.compare(Fraction(j + 2, j + 1)) not in (0, 1):
            return False
        r = (j + 1) / (a**j * d.lam * (1 - 1 / a ** (j + 1)))
        return r.compare(1) in (-1, 0)
    return False


class DecayCertificate(enum.Enum):
    ANALYTIC = "analytic"
    RUN_LENGTH = "run_length"
    NONE = "none"


@dataclass
class Perturbation:
    """The sequence ``ht_j = c_j / p_j`` and its normalization ``h = ht / sup|ht|``.

    Magnitudes are kept relative to ``|ht_0| = 1/p_0``: ``R_j = |c_j| w_0 / w_j``,
    exact whenever the weights and ``a`` are.  ``truncated_at`` is set for an
    unbounded sequence attached anyway; beyond it ``h`` is taken as 0.
    """

    base_distribution: DiscretePMF
    transform: LogTransformSpec
    argmax_index: int
    max_relative: Scalar
    scanned: int
    decay: DecayCertificate
    truncated_at: Optional[int] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def a(self) -> Scalar:
        return self.transform.a

    @property
    def cancelled(self) -> CancelledTerms:
        return cancelled_terms(self.a)

    @property
    def sup_certified(self) -> bool:
        return self.decay is DecayCertificate.ANALYTIC

    def relative(self, j: int) -> Scalar:
        """``|ht_j| / |ht_0|``."""
        d = self.base_distribution
        w = d.weight(j)
        if w.sign() != 1:
            raise SupportError(f"p_{j} is not certified positive")
        return abs(self.cancelled[j]) * d.weight(0) / w

    def normalized(self, j: int) -> Scalar:
        """``h_j``, with ``sup_j |h_j| = 1``."""
        if self.truncated_at is not None and j > self.truncated_at:
            return Scalar(0)
        sign = -1 if j % 2 else 1
        return sign * self.relative(j) / self.max_relative

    def unnormalized(self, j: int, prec: int = DEFAULT_BITS) -> Scalar:
        """``ht_j = c_j / p_j``."""
        d = self.base_distribution
        return self.cancelled[j] / (d.normalizer(prec) * d.weight(j))

    def normalizer(self, prec: int = DEFAULT_BITS) -> Scalar:
        """``M = sup_j |ht_j|``."""
        d = self.base_distribution
        return self.max_relative / (d.normalizer(prec) * d.weight(0))

    def weighted(self, j: int, prec: int = DEFAULT_BITS) -> Scalar:
        """``p_j h_j = c_j p_0 / R_max``, formed without ``p_j`` or ``ht_j``."""
        if self.truncated_at is not None and j > self.truncated_at:
            return Scalar(0)
        d = self.base_distribution
        return d.normalizer(prec) * self.cancelled[j] * d.weight(0) / self.max_relative

    def weighted_exact_part(self, j: int) -> Scalar:
        """``w_j h_j = c_j w_0 / R_max``: the weighted perturbation without the constant ``C``."""
        if self.truncated_at is not None and j > self.truncated_at:
            return Scalar(0)
        return self.cancelled[j] * self.base_distribution.weight(0) / self.max_relative


def build_perturbation(
    d: DiscretePMF,
    t: LogTransformSpec,
    scan_horizon: int = DEFAULT_SCAN_HORIZON,
    run_length: int = DEFAULT_RUN_LENGTH,
    allow_unbounded: bool = False,
) -> Perturbation:
    """Scan ``|ht_j|`` for its maximum and certify that later terms never exceed it.

    The scan stops once the ratio ``|ht_{j+1}| / |ht_j|`` is proven at most 1
    for all later indices (Heine and Poisson closed forms), or has been
    certified at most 1 for ``run_length`` consecutive indices.  If neither
    happens by ``scan_horizon`` the sequence is presumed unbounded:
    :class:`NoDecayCertificate` is raised unless ``allow_unbounded``, in which
    case the sequence is normalized over the scanned range and cut off there.
    """
    if scan_horizon < 1:
        raise DomainError("scan_horizon must be positive")
    if not isinstance(t, LogTransformSpec):
        t = LogTransformSpec(t)
    a = t.a
    if d.weight(0).sign() != 1:
        raise SupportError("p_0 must be positive")
    best, argmax, streak = Scalar(1), 0, 0
    notes: List[str] = []
    ambiguous_max = False
    for j in range(scan_horizon):
        rho = d.weight_ratio(j)
        if rho.sign() != 1:
            raise SupportError(f"p_{j + 1} is not certified positive")
        r = 1 / (a**j * (1 - 1 / a ** (j + 1)) * rho)
        relative = abs(cancelled_terms(a)[j + 1]) * d.weight(0) / d.weight(j + 1)
        cmp = relative.compare(best)
        if cmp is None:
            ambiguous_max = True
        if cmp == 1 or (cmp is None and relative.upper > best.upper):
            best, argmax = relative, j + 1
        if r.compare(1) in (-1, 0):
            streak += 1
        else:
            streak = 0
        if _decay_proven(d, a, j + 1) and best.compare(relative) in (0, 1):
            decay = DecayCertificate.ANALYTIC
            break
        if streak >= run_length:
            decay = DecayCertificate.RUN_LENGTH
            notes.append(
                f"sup|ht| certified over the scan only: ratio <= 1 for {run_length} consecutive indices"
            )
            break
    else:
        if not allow_unbounded:
            raise NoDecayCertificate(
                f"|ht_j| did not settle into decay within {scan_horizon} indices; "
                "the sequence is likely unbounded"
            )
        notes.append(f"no decay certificate; h is cut off after index {scan_horizon}")
        return Perturbation(d, t, argmax, best, scan_horizon, DecayCertificate.NONE,
                            truncated_at=scan_horizon, warnings=notes)
    if ambiguous_max:
        notes.append("the maximizing index is ambiguous at this precision")
    return Perturbation(d, t, argmax, best, j + 1, decay, warnings=notes)


# -- moment sums -------------------------------------------------------------


class MomentVerdict(enum.Enum):
    VANISHES = "VanishesWithin"
    VIOLATED = "Violated"


@dataclass(frozen=True)
class MomentSumCertificate:
    """``S_k = sum_j a^(kj) c_j``, truncated at ``truncation_index``."""

    k: int
    truncation_index: int
    partial_sum: Scalar
    tail_bound: Fraction
    verdict: MomentVerdict
    bound: Fraction

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "truncation_index": self.truncation_index,
            "partial_sum": _scalar_out(self.partial_sum),
            "partial_sum_abs_upper": float(self.partial_sum.abs_upper()),
            "tail_bound": float(self.tail_bound),
            "verdict": self.verdict.value,
            "bound": float(self.bound),
        }


def _scalar_out(x: Scalar) -> str:
    if x.is_exact:
        return format_rational(x.value)
    return x.to_decimal(30)


def moment_partial_sums(a: ScalarLike, k: int, n: int) -> List[Scalar]:
    """Partial sums of ``S_k`` through indices ``0..n``."""
    a = as_scalar(a)
    c = cancelled_terms(a)
    out, acc, scale = [], Scalar(0), Scalar(1)
    ak = a**k
    for j in range(n + 1):
        acc = acc + scale * c[j]
        out.append(acc)
        scale = scale * ak
    return out


def moment_sum(
    p: Perturbation,
    k: int,
    target: Union[Fraction, str] = Fraction(1, 10**30),
    index_cap: int = 100_000,
) -> MomentSumCertificate:
    """Certify ``|sum_j a^(kj) p_j ht_j| <= target`` via the cancelled form.

    Only ``a`` (and a cut-off, for an attached unbounded sequence) enters, so
    the certificate does not depend on the base distribution.
    """
    return base_moment_sum(p.a, k, target, truncated_at=p.truncated_at, index_cap=index_cap)


def base_moment_sum(
    a: ScalarLike,
    k: int,
    target: Union[Fraction, str] = Fraction(1, 10**30),
    truncated_at: Optional[int] = None,
    index_cap: int = 100_000,
) -> MomentSumCertificate:
    """``S_k = sum_j a^(kj) c_j`` with a certified tail.

    Term ratios satisfy ``|t_{j+1} / t_j| = a^(k-j) / (1 - a^-(j+1))``, which
    decreases in ``j``, so once it is below 1 the tail is geometric.
    """
    if k < 0:
        raise DomainError("k must be nonnegative")
    target = parse_rational(target) if isinstance(target, str) else Fraction(target)
    a = BaseParam(as_scalar(a)).a
    c = cancelled_terms(a)
    ak = a**k

    if truncated_at is not None:
        acc, scale = Scalar(0), Scalar(1)
        for j in range(truncated_at + 1):
            acc = acc + scale * c[j]
            scale = scale * ak
        return _certificate(k, truncated_at, acc, Fraction(0), target)

    scales: Dict[int, Scalar] = {}

    def term(j):
        scales[j] = scales[j - 1] * ak if j else Scalar(1)
        return scales[j] * c[j]

    def tail(n):
        rho = ak / (a**n * (1 - 1 / a ** (n + 1)))
        if rho.upper >= 1:
            return None
        rho_hi = rho.upper
        return (scales[n] * c[n]).abs_upper() * rho_hi / (1 - rho_hi)

    # S_k = 0 forces |partial| <= tail, so half the target leaves room for both
    res = sum_with_tail(term, tail, target / 2, index_cap=index_cap)
    tail_bound = res.bound - res.value.radius
    return _certificate(k, res.last_index, res.value, tail_bound, target)


def _certificate(k, n, partial, tail_bound, target) -> MomentSumCertificate:
    ok = partial.abs_upper() + tail_bound <= target
    verdict = MomentVerdict.VANISHES if ok else MomentVerdict.VIOLATED
    return MomentSumCertificate(k, n, partial, tail_bound, verdict, target)


# -- class members -----------------------------------------------------------


@dataclass(frozen=True)
class StieltjesMember:
    """``g_j = p_j (1 + eps h_j)`` for ``eps`` in ``[-1, 1]``."""

    perturbation: Perturbation
    epsilon: Scalar

    def factor(self, j: int) -> Scalar:
        """``1 + eps h_j``; exact when ``eps`` and ``h_j`` are."""
        return 1 + self.epsilon * self.perturbation.normalized(j)

    def deviation(self, j: int, prec: int = DEFAULT_BITS) -> Scalar:
        """``eps p_j h_j`` in the cancelled form."""
        return self.epsilon * self.perturbation.weighted(j, prec)

    def exact_part(self, j: int) -> Scalar:
        """``w_j + eps w_j h_j``: ``g_j`` without the normalizing constant."""
        p = self.perturbation
        return p.base_distribution.weight(j) + self.epsilon * p.weighted_exact_part(j)

    def mass(self, j: int, prec: int = DEFAULT_BITS) -> Scalar:
        d = self.perturbation.base_distribution
        return d.normalizer(prec) * self.exact_part(j)


def class_member(p: Perturbation, epsilon: ScalarLike) -> StieltjesMember:
    eps = as_scalar(epsilon)
    if not (eps.lower >= -1 and eps.upper <= 1):
        raise RangeError(f"epsilon must lie in [-1, 1], got {eps}")
    return StieltjesMember(p, eps)


@dataclass
class MomentCheck:
    k: int
    identity_bound: Fraction
    direct_bound: Fraction
    passed: bool

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "identity_bound": float(self.identity_bound),
            "direct_bound": float(self.direct_bound),
            "passed": self.passed,
        }


@dataclass
class MemberReport:
    epsilon: Scalar
    horizon: int
    nonnegative: bool
    first_negative: Optional[int]
    min_factor: Fraction
    mass_bound: Fraction
    mass_passed: bool
    moments: List[MomentCheck]
    target: Fraction
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.nonnegative and self.mass_passed and all(m.passed for m in self.moments)

    def to_json(self) -> dict:
        return {
            "epsilon": _scalar_out(self.epsilon),
            "horizon": self.horizon,
            "nonnegative": self.nonnegative,
            "first_negative": self.first_negative,
            "min_factor": float(self.min_factor),
            "mass_bound": float(self.mass_bound),
            "mass_passed": self.mass_passed,
            "moments": [m.to_json() for m in self.moments],
            "target": float(self.target),
            "passed": self.passed,
            "notes": self.notes,
        }


def _member_series(m: StieltjesMember, z: Scalar, target: Fraction, bits: int) -> Certified:
    """``sum_j z^j g_j`` with tail ``2 C sum_{j>N} w_j z^j`` (valid while ``|h| <= 1``)."""
    p = m.perturbation
    d = p.base_distribution
    c = d.normalizer(bits)
    zb = z.to_approx(bits)
    powers: Dict[int, Scalar] = {}

    def term(j):
        powers[j] = powers[j - 1] * zb if j else Scalar(1).to_approx(bits)
        return powers[j] * m.exact_part(j).to_approx(bits)

    def tail(n):
        wt = d.weight_tail(n, z)
        if wt is None:
            return None
        return 2 * wt

    s = sum_with_tail(term, tail, target / (4 * max(c.upper, Fraction(1))))
    value = c * s.enclosure()
    return Certified(value, value.radius, s.last_index)


def verify_member(
    m: StieltjesMember,
    max_k: int,
    target: Union[Fraction, str] = Fraction(1, 10**12),
    horizon: int = DEFAULT_SCAN_HORIZON,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> MemberReport:
    """Check nonnegativity, total mass and equality of moments up to ``max_k``.

    Moment differences are certified twice: through the identity
    ``E_g[Y^k] - E_p[Y^k] = eps S_k p_0 / R_max`` and by direct summation of
    both moment series.
    """
    target = parse_rational(target) if isinstance(target, str) else Fraction(target)
    p = m.perturbation
    d = p.base_distribution
    notes = list(p.warnings)

    first_negative, uncertain = None, []
    min_factor = Fraction(1)
    for j in range(horizon + 1):
        f = m.factor(j)
        min_factor = min(min_factor, f.lower)
        sign = f.sign()
        if sign == -1:
            first_negative = j
            break
        if sign is None and f.lower < 0:
            uncertain.append(j)
    nonnegative = first_negative is None and not uncertain
    if uncertain:
        notes.append(f"nonnegativity not certified at indices {uncertain[:10]}")
    if not p.sup_certified and p.truncated_at is None:
        notes.append(f"nonnegativity beyond index {horizon} rests on the scan, not a proof")

    pol = PrecisionPolicy(policy.initial_bits, policy.max_bits, policy.escalation_factor, target / 2)
    a = p.a

    def direct_difference(k):
        z = a**k

        def compute(bits):
            eg = _member_series(m, z, target / 4, bits)
            ep = pgf(d, z, target / 4, policy=PrecisionPolicy(bits, max(bits, policy.max_bits),
                                                                 policy.escalation_factor, target / 4))
            diff = eg.enclosure() - ep.enclosure()
            return Certified(diff, diff.abs_upper())

        return escalate(compute, pol, width=lambda r: r.value.radius)

    # total mass: sum g_j - 1
    mass_res = escalate(lambda bits: _member_series(m, Scalar(1), target / 4, bits), pol)
    mass_bound = (mass_res.enclosure() - 1).abs_upper()

    checks = []
    for k in range(max_k + 1):
        s = moment_sum(p, k, target)
        scale = (m.epsilon * d.normalizer(policy.initial_bits) * d.weight(0) / p.max_relative)
        identity = abs(scale).upper * (s.partial_sum.abs_upper() + s.tail_bound)
        direct = direct_difference(k).bound
        checks.append(MomentCheck(k, identity, direct, identity <= target and direct <= target))
    return MemberReport(
        m.epsilon, horizon, nonnegative, first_negative, min_factor or Fraction(0),
        mass_bound, mass_bound <= target, checks, target, notes,
    )
