from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from logstieltjes.distributions import Heine, LogTransformSpec, Poisson, Table, pgf
from logstieltjes.errors import DomainError, NoDecayCertificate, RangeError
from logstieltjes.numeric import Scalar
from logstieltjes.qseries import BaseParam
from logstieltjes.stieltjes import (
    DecayCertificate,
    MomentVerdict,
    base_moment_sum,
    build_perturbation,
    cancelled_terms,
    class_member,
    moment_partial_sums,
    moment_sum,
    verify_member,
)

HALF = Fraction(1, 2)
TIGHT = Fraction(1, 10**30)


def log_base(a):
    return LogTransformSpec(BaseParam(a))


@pytest.fixture(scope="module")
def heine_pert():
    return build_perturbation(Heine(2, HALF), log_base(2))


@pytest.mark.parametrize("a", [2, 3, Fraction(5, 2), Fraction(11, 10)])
def test_cancelled_terms_match_closed_form(a):
    c = cancelled_terms(Scalar(a))
    for j in range(25):
        assert c[j].value == oracles.cancelled_term(a, j)


def test_partial_sum_prefix():
    assert [s.value for s in moment_partial_sums(2, 0, 4)] == [1, -1, Fraction(1, 3), Fraction(-1, 21), Fraction(1, 315)]


@pytest.mark.parametrize("a, k", [(2, 0), (2, 7), (3, 4), (Fraction(5, 2), 10)])
def test_moment_sum_vanishes(a, k):
    cert = base_moment_sum(a, k, TIGHT)
    assert cert.verdict is MomentVerdict.VANISHES
    assert cert.partial_sum.abs_upper() + cert.tail_bound <= TIGHT
    assert cert.partial_sum.is_exact
    assert abs(oracles.moment_sum_mp(a, k)) < 1e-30


def test_moment_sum_input_checks():
    with pytest.raises(DomainError):
        base_moment_sum(2, -1)
    with pytest.raises(DomainError):
        base_moment_sum(Fraction(1, 2), 0)


def test_heine_perturbation_has_unit_sup(heine_pert):
    p = heine_pert
    assert p.decay is DecayCertificate.ANALYTIC and p.sup_certified
    assert p.argmax_index == 0
    assert [p.normalized(j) for j in range(6)] == [Scalar((-1) ** j) for j in range(6)]


def test_unnormalized_and_weighted_agree(heine_pert):
    p = heine_pert
    d = p.base_distribution
    for j in (0, 3, 9):
        via_h = p.unnormalized(j, 256) / p.normalizer(256) * d.normalizer(256) * d.weight(j)
        assert (via_h - p.weighted(j, 256)).abs_upper() < Fraction(1, 10**60)


def test_poisson_perturbation_bounded():
    p = build_perturbation(Poisson(3), log_base(Fraction(5, 2)))
    assert p.decay is DecayCertificate.ANALYTIC
    values = [abs(p.normalized(j)) for j in range(120)]
    assert max(v.upper for v in values) == 1
    assert values[p.argmax_index] == Scalar(1)


def test_fast_decay_raises_without_override():
    d = Table(rule=lambda j: Fraction(1, 2 ** (j * (j + 1) // 2)), rule_ratio_bound=lambda j: Fraction(1, 2 ** (j + 1)))
    with pytest.raises(NoDecayCertificate):
        build_perturbation(d, log_base(2), scan_horizon=40)
    p = build_perturbation(d, log_base(2), scan_horizon=40, allow_unbounded=True)
    assert p.decay is DecayCertificate.NONE and p.truncated_at == 40
    assert p.normalized(41) == Scalar(0)
    assert moment_sum(p, 40).verdict is MomentVerdict.VIOLATED


@pytest.mark.parametrize("eps", [-1, Fraction(-1, 3), 0, HALF, 1])
def test_member_factors_nonnegative(heine_pert, eps):
    m = class_member(heine_pert, eps)
    assert all(m.factor(j).sign() in (0, 1) for j in range(100))


@given(st.fractions(min_value=-1, max_value=1, max_denominator=64))
@settings(max_examples=30, deadline=None)
def test_plus_minus_epsilon_average_to_base(eps):
    p = build_perturbation(Heine(2, HALF), log_base(2))
    up, down = class_member(p, eps), class_member(p, -eps)
    for j in range(30):
        assert (up.factor(j) + down.factor(j)) / 2 == Scalar(1)
        assert up.exact_part(j) + down.exact_part(j) == 2 * p.base_distribution.weight(j)


def test_epsilon_range(heine_pert):
    with pytest.raises(RangeError):
        class_member(heine_pert, Fraction(3, 2))


def test_members_are_distinct(heine_pert):
    a, b = class_member(heine_pert, HALF), class_member(heine_pert, -HALF)
    assert a.exact_part(1) != b.exact_part(1)


def test_verify_member_reports(heine_pert):
    rep = verify_member(class_member(heine_pert, HALF), 4, Fraction(1, 10**12), horizon=80)
    assert rep.passed and rep.nonnegative
    assert all(c.identity_bound <= Fraction(1, 10**12) for c in rep.moments)
    js = rep.to_json()
    assert js["passed"] and len(js["moments"]) == 5


def test_member_moment_matches_base_directly(heine_pert):
    # E_g[Y^2] through the member series against the base pgf oracle
    m = class_member(heine_pert, -1)
    d = heine_pert.base_distribution
    total = sum((m.mass(j, 256) * Scalar(4) ** j for j in range(120)), Scalar(0))
    ref = oracles.heine_pgf(2, HALF, 4)
    assert abs(float(total.mid) - float(ref)) < 1e-12
    assert abs(float(pgf(d, 4, Fraction(1, 10**20)).value.mid - total.mid)) < 1e-12


def test_certificate_json(heine_pert):
    js = moment_sum(heine_pert, 3).to_json()
    assert js["verdict"] == "VanishesWithin" and js["k"] == 3
