"""Deciding whether ``Y = a^X`` admits Stieltjes classes.

Three routes are available:

* closed-form rules for the Poisson and Heine families;
* the growth test on ``w_j = ln p_j + (j(j-1)/2) ln a`` (bounded below means
  a perturbation exists; ``w_j -> -inf`` means none does);
* for log-concave laws, comparison of ``a`` with ``exp(1/(2 beta))`` where
  ``beta = lim ln f(r) / ln^2 r`` for the generating function ``f``.

Finite-horizon tests cannot decide limits with certainty, so the growth and
beta routes answer ``Unknown`` or ``Boundary`` rather than guess.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Union

from .distributions import (
    DiscretePMF,
    Heine,
    LogTransformSpec,
    Outcome,
    Poisson,
    check_log_concavity,
    log_pgf,
    log_pmf,
)
from .errors import DomainError, HypothesisError, NonConvergent, SupportError
from .numeric import DEFAULT_BITS, Scalar, ScalarLike, as_scalar, format_rational

DEFAULT_HORIZON = 500
TAIL_FRACTION = Fraction(1, 5)
BOUNDARY_NOTE = (
    "a equals the growth threshold exp(1/(2 beta)); log-concavity and the growth "
    "constant alone do not settle this case"
)
LIMIT_NOTE = (
    "beta is defined as a limit; the coefficient upper estimate only needs the "
    "upper limit, so the estimate is trusted only once its trend has stabilized"
)


class Verdict(enum.Enum):
    EXISTS = "Exists"
    NOT_EXISTS = "NotExists"
    BOUNDARY = "Boundary"
    UNKNOWN = "Unknown"


class Route(enum.Enum):
    FAMILY_RULE = "FamilyRule"
    CONDITION_W = "ConditionW"
    DECAY_RULE = "DecayRule"
    BETA_THRESHOLD = "BetaThreshold"
    BOUNDED_SUPPORT = "BoundedSupport"


@dataclass
class Classification:
    verdict: Verdict
    route: Route
    evidence: Dict[str, object] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "route": self.route.value,
            "evidence": {k: _evidence_out(v) for k, v in self.evidence.items()},
            "notes": list(self.notes),
        }


def _evidence_out(v):
    if isinstance(v, Scalar):
        if v.is_exact:
            return format_rational(v.value)
        return v.to_decimal(20)
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (list, tuple)):
        return [_evidence_out(x) for x in v]
    return v


def _base(a: Union[ScalarLike, LogTransformSpec]) -> Scalar:
    if isinstance(a, LogTransformSpec):
        return a.a
    a = as_scalar(a)
    if a.sign() != 1:
        raise DomainError(f"a must be positive, got {a}")
    if a.compare(1) in (0, None):
        raise DomainError("a = 1 gives a degenerate Y")
    return a


def classify_family(d: DiscretePMF, a: Union[ScalarLike, LogTransformSpec]) -> Classification:
    """Closed-form verdicts for Poisson and Heine laws, and bounded support for ``a < 1``."""
    a = _base(a)
    if a.compare(1) == -1:
        return Classification(Verdict.NOT_EXISTS, Route.BOUNDED_SUPPORT, {"a": a},
                              ["Y has bounded support, so its law is moment-determinate"])
    if isinstance(d, Poisson):
        return Classification(Verdict.EXISTS, Route.FAMILY_RULE, {"a": a, "lambda": d.lam},
                              ["Poisson masses dominate C a^(-j(j-1)/2) for every a > 1"])
    if isinstance(d, Heine):
        aq = a * d.q
        mu = d.lam * (1 - d.q)
        ev = {"a": a, "q": d.q, "lambda": d.lam, "a*q": aq, "lambda*(1-q)": mu}
        cmp = aq.compare(1)
        if cmp is None:
            return Classification(Verdict.UNKNOWN, Route.FAMILY_RULE, ev,
                                  ["cannot certify how a compares with 1/q"])
        if cmp == 1:
            return Classification(Verdict.EXISTS, Route.FAMILY_RULE, ev, ["a > 1/q"])
        if cmp == -1:
            return Classification(Verdict.NOT_EXISTS, Route.FAMILY_RULE, ev, ["1 < a < 1/q"])
        mcmp = mu.compare(1)
        if mcmp is None:
            return Classification(Verdict.UNKNOWN, Route.FAMILY_RULE, ev,
                                  ["a = 1/q but lambda(1-q) is not certified against 1"])
        if mcmp >= 0:
            return Classification(Verdict.EXISTS, Route.FAMILY_RULE, ev, ["a = 1/q and lambda(1-q) >= 1"])
        return Classification(Verdict.NOT_EXISTS, Route.FAMILY_RULE, ev, ["a = 1/q and lambda(1-q) < 1"])
    return Classification(Verdict.UNKNOWN, Route.FAMILY_RULE, {"a": a},
                          [f"no closed-form rule for {d.kind} distributions"])


def growth_statistic(d: DiscretePMF, a: Scalar, horizon: int, prec: int = DEFAULT_BITS) -> List[Scalar]:
    """``w_j = ln p_j + (j(j-1)/2) ln a`` for ``j = 0..horizon``."""
    ln_a = a.log(prec)
    return [log_pmf(d, j, prec) + Fraction(j * (j - 1), 2) * ln_a for j in range(horizon + 1)]


def test_condition_W(
    d: DiscretePMF,
    t: Union[LogTransformSpec, ScalarLike],
    horizon: int = DEFAULT_HORIZON,
    tail_fraction: Fraction = TAIL_FRACTION,
    prec: int = DEFAULT_BITS,
) -> Classification:
    """Decide existence from the growth of ``w_j`` over a finite horizon.

    The increments ``w_{j+1} - w_j = ln u_j`` with ``u_j = a^j p_{j+1}/p_j``
    are examined over the last ``tail_fraction`` of the horizon:

    * every ``u_j >= 1``: ``w`` is nondecreasing there, hence bounded below
      by its minimum over the horizon -> ``Exists``;
    * every ``u_j < 1`` and ``u_j`` nonincreasing: ``w`` falls at least
      linearly -> ``NotExists``;
    * anything else -> ``Unknown``.

    Comparisons on ``u_j`` are exact whenever the parameters are rational.
    """
    a = _base(t)
    if a.compare(1) != 1:
        raise DomainError("the growth test needs a > 1")
    if horizon < 5:
        raise DomainError("horizon must be at least 5")
    start = horizon - max(2, int(horizon * tail_fraction))
    us = []
    for j in range(start, horizon):
        rho = d.weight_ratio(j)
        if rho.sign() != 1:
            raise SupportError(f"p_{j + 1} is not certified positive")
        us.append(a**j * rho)
    w = growth_statistic(d, a, horizon, prec)
    jmin = min(range(horizon + 1), key=lambda j: w[j].mid)
    slope = (w[horizon] - w[start]) / (horizon - start)
    ev = {
        "horizon": horizon,
        "window_start": start,
        "min_w": w[jmin],
        "argmin_w": jmin,
        "w_at_horizon": w[horizon],
        "mean_slope_in_window": slope,
    }
    cmps = [u.compare(1) for u in us]
    if all(c in (0, 1) for c in cmps):
        return Classification(Verdict.EXISTS, Route.CONDITION_W, ev,
                              ["w_j is nondecreasing over the tail window"])
    decreasing = all(us[i + 1].compare(us[i]) in (-1, 0) for i in range(len(us) - 1))
    if all(c == -1 for c in cmps) and decreasing:
        ev["decay_rate_lower_bound"] = -us[0].log(prec)
        return Classification(Verdict.NOT_EXISTS, Route.DECAY_RULE, ev,
                              ["w_j decreases at least linearly over the tail window, so "
                               "p_j = o(a^(-j(j-1)/2))"])
    return Classification(Verdict.UNKNOWN, Route.CONDITION_W, ev,
                          ["the tail window does not settle the growth of w_j"])


@dataclass
class BetaEstimate:
    beta: Optional[Scalar]
    grid: List[Scalar]
    values: List[Scalar]
    differences: List[Scalar]
    converging: bool

    def to_json(self) -> dict:
        return {
            "beta": None if self.beta is None else float(self.beta),
            "grid_log2": [math.log2(float(r)) for r in self.grid],
            "values": [float(v) for v in self.values],
            "differences": [float(x) for x in self.differences],
            "converging": self.converging,
        }


def geometric_grid(first_exp: int = 10, last_exp: int = 60, step: int = 10, base: int = 2) -> List[Scalar]:
    return [Scalar(base**e) for e in range(first_exp, last_exp + 1, step)]


def estimate_beta(d: DiscretePMF, r_grid: Optional[Sequence[ScalarLike]] = None,
                  prec: int = DEFAULT_BITS) -> BetaEstimate:
    """Sample ``ln f(r) / ln^2 r`` on a geometric grid.

    The last sample is the estimate when the successive differences shrink;
    when they grow (order-one growth such as Poisson) no estimate is returned.
    """
    grid = [as_scalar(r) for r in (r_grid or geometric_grid())]
    if len(grid) < 4:
        raise DomainError("the grid needs at least 4 points")
    if any(grid[i + 1].compare(grid[i]) != 1 for i in range(len(grid) - 1)) or grid[0].compare(1) != 1:
        raise DomainError("the grid must be increasing and exceed 1")
    values = []
    for r in grid:
        try:
            ln_f = log_pgf(d, r, Fraction(1, 10**12), prec)
        except NonConvergent as exc:
            raise NonConvergent(f"pgf failed at r = {r}: {exc}") from exc
        ln_r = r.log(prec)
        values.append(ln_f / (ln_r * ln_r))
    diffs = [values[i + 1] - values[i] for i in range(len(values) - 1)]
    mags = [abs(float(x)) for x in diffs]
    converging = all(mags[i + 1] < mags[i] for i in range(len(mags) - 1)) and mags[-1] < abs(float(values[-1]))
    beta = values[-1] if converging and values[-1].sign() == 1 else None
    return BetaEstimate(beta, grid, values, diffs, beta is not None)


def classify_by_beta(
    d: DiscretePMF,
    t: Union[LogTransformSpec, ScalarLike],
    horizon: int = 200,
    r_grid: Optional[Sequence[ScalarLike]] = None,
    symbolic: bool = True,
    prec: int = DEFAULT_BITS,
) -> Classification:
    """Compare ``a`` with ``exp(1/(2 beta))`` for a log-concave law.

    For Heine laws the threshold is also known exactly (``1/q``) and, with
    ``symbolic=True``, it decides the verdict; the estimate is kept as
    evidence.  Otherwise ``a`` within a factor ``exp(+-|last difference|/2)``
    of the estimated threshold is reported as ``Boundary``.
    """
    a = _base(t)
    lc = check_log_concavity(d, horizon, prec=max(prec, 256))
    if lc.outcome is not Outcome.PASS:
        raise HypothesisError(
            f"log-concavity {lc.outcome.value} up to {horizon}"
            + (f" (first violation at {lc.first_violation})" if lc.first_violation else "")
        )
    est = estimate_beta(d, r_grid, prec)
    ev: Dict[str, object] = {"a": a, "beta_samples": est.values}
    notes = [LIMIT_NOTE]
    if est.beta is None:
        return Classification(Verdict.UNKNOWN, Route.BETA_THRESHOLD, ev,
                              notes + ["ln f(r)/ln^2 r does not converge on the grid; beta is undefined"])
    beta = est.beta
    threshold = (1 / (2 * beta)).exp(prec)
    ev.update({"beta": beta, "threshold": threshold})
    ln_a = a.log(prec)
    if symbolic and isinstance(d, Heine):
        exact_threshold = 1 / d.q
        ev["threshold_exact"] = exact_threshold
        cmp = a.compare(exact_threshold)
    else:
        band = abs(float(est.differences[-1])) / 2
        gap = float(ln_a) - float(threshold.log(prec))
        ev["boundary_band_log"] = band
        cmp = 0 if abs(gap) <= band else (1 if gap > 0 else -1)
    if cmp is None or cmp == 0:
        return Classification(Verdict.BOUNDARY, Route.BETA_THRESHOLD, ev, notes + [BOUNDARY_NOTE])
    if cmp == 1:
        return Classification(Verdict.EXISTS, Route.BETA_THRESHOLD, ev, notes + ["a > exp(1/(2 beta))"])
    return Classification(Verdict.NOT_EXISTS, Route.BETA_THRESHOLD, ev, notes + ["a < exp(1/(2 beta))"])


@dataclass
class LimitDiagnostic:
    indices: List[int]
    values: List[Scalar]
    differences: List[Scalar]
    log_concave: Outcome

    def to_json(self) -> dict:
        return {
            "indices": self.indices,
            "values": [float(v) for v in self.values],
            "differences": [float(x) for x in self.differences],
            "log_concave": self.log_concave.value,
        }


def limit_diagnostic(d: DiscretePMF, horizon: int = 200, points: int = 8,
                     prec: int = DEFAULT_BITS) -> LimitDiagnostic:
    """``ln p_j / j^2`` on a sparse grid up to ``horizon``; tends to ``-1/(4 beta)``."""
    if horizon < 2:
        raise DomainError("horizon must be at least 2")
    lc = check_log_concavity(d, horizon, prec=max(prec, 256))
    step = max(1, horizon // points)
    idx = sorted(set(list(range(step, horizon + 1, step)) + [horizon]))
    values = [log_pmf(d, j, prec) / (j * j) for j in idx]
    diffs = [values[i + 1] - values[i] for i in range(len(values) - 1)]
    return LimitDiagnostic(idx, values, diffs, lc.outcome)
