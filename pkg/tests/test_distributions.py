import json
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from logstieltjes.distributions import (
    Heine,
    LogTransformSpec,
    Outcome,
    Poisson,
    Table,
    check_log_concavity,
    from_json,
    heine_pgf_product,
    log_pgf,
    log_pmf,
    moment_of_Y,
    pgf,
    pmf,
)
from logstieltjes.errors import DomainError, SupportError
from logstieltjes.numeric import Scalar
from logstieltjes.qseries import BaseParam

HALF = Fraction(1, 2)
TIGHT = Fraction(1, 10**25)


@pytest.mark.parametrize("j", [0, 1, 5, 20])
def test_heine_pmf_against_oracle(j):
    res = pmf(Heine(2, HALF), j, TIGHT)
    assert oracles.close(res.value, oracles.heine_pmf(2, HALF, j), 2 * TIGHT)


@pytest.mark.parametrize("j", [0, 3, 30])
def test_poisson_pmf_against_oracle(j):
    res = pmf(Poisson(Fraction(7, 2)), j, TIGHT)
    assert oracles.close(res.value, oracles.poisson_pmf(Fraction(7, 2), j), 2 * TIGHT)


@given(st.integers(0, 40))
@settings(max_examples=25)
def test_heine_weight_forms_agree(j):
    d = Heine(Fraction(5, 3), Fraction(2, 5))
    w = d.weight(j)
    assert w == d.weight_qfactorial_form(j) == d.weight_pochhammer_form(j)
    assert w.value == oracles.heine_weight_exact(Fraction(5, 3), Fraction(2, 5), j)


def test_heine_tends_to_poisson():
    lam = Fraction(3, 2)
    near = Heine(lam, Fraction(999, 1000))
    for j in range(6):
        assert abs(float(pmf(near, j, Fraction(1, 10**12)).value.mid) - float(oracles.poisson_pmf(lam, j))) < 2e-3


def test_log_pmf_matches_pmf():
    d = Heine(2, HALF)
    lp = log_pmf(d, 50, 256)
    ref = mpmath.log(oracles.heine_pmf(2, HALF, 50))
    assert oracles.close(lp, ref, Fraction(1, 10**40))


@pytest.mark.parametrize("d", [Heine(2, HALF), Poisson(3), Table([1, 2, 1])])
def test_total_mass_is_one(d):
    assert pgf(d, 1, TIGHT, method="series").enclosure().contains(1)


def test_heine_pgf_three_ways():
    d = Heine(1, HALF)
    series = pgf(d, 4, TIGHT, method="series").enclosure()
    product = heine_pgf_product(d, 4, TIGHT, 128).enclosure()
    assert series.contains(6) and product.contains(6)
    other = pgf(d, Fraction(5, 2), TIGHT).enclosure()
    assert oracles.close(other, oracles.heine_pgf(1, HALF, Fraction(5, 2)), 2 * TIGHT)


def test_poisson_pgf_closed_and_series_agree():
    d = Poisson(2)
    closed = pgf(d, 3, TIGHT, method="closed").enclosure()
    series = pgf(d, 3, TIGHT, method="series").enclosure()
    assert oracles.close(closed, mpmath.exp(4), 2 * TIGHT)
    assert oracles.close(series, mpmath.exp(4), 2 * TIGHT)


def test_relative_pgf_and_log_pgf_at_large_argument():
    d = Heine(1, HALF)
    z = Fraction(2**40)
    rel = pgf(d, z, Fraction(1, 10**12), relative=True)
    assert rel.bound / rel.value.abs_lower() <= Fraction(1, 10**12)
    assert oracles.close(log_pgf(d, z), mpmath.log(oracles.heine_pgf(1, HALF, z)), Fraction(1, 10**10))
    assert log_pgf(Poisson(3), 2**60).contains(3 * (2**60 - 1))


def test_pgf_rejects_negative_argument():
    with pytest.raises(DomainError):
        pgf(Poisson(1), -1)


def test_moments_of_lognormal_lattice():
    d, t = Poisson(1), LogTransformSpec(BaseParam(2))
    assert moment_of_Y(d, t, 0).value == Scalar(1)
    assert oracles.close(moment_of_Y(d, t, 2, TIGHT).value, mpmath.exp(3), 2 * TIGHT)
    assert t.support_point(3) == Scalar(8)


def test_log_concavity_passes_for_families():
    for d in (Poisson(3), Heine(2, HALF)):
        rep = check_log_concavity(d, 200, 256)
        assert rep.outcome is Outcome.PASS and not rep.inconclusive


def test_log_concavity_counterexample():
    rep = check_log_concavity(Table([HALF, Fraction(1, 8), Fraction(1, 4), Fraction(1, 8)]), 10)
    assert rep.outcome is Outcome.FAIL
    assert rep.first_violation == 1


def test_log_concavity_uses_exact_fallback_on_ties():
    # geometric weights sit exactly on the boundary p_j^2 = p_{j-1} p_{j+1}
    rep = check_log_concavity(Table([1, HALF, Fraction(1, 4), Fraction(1, 8)]), 2)
    assert rep.outcome is Outcome.PASS
    assert rep.exact_fallbacks == 2


def test_table_geometric_tail():
    d = Table([4, 2, 1], geometric_ratio=HALF)
    assert d.weight(5) == Scalar(Fraction(1, 8))
    assert d.normalizer().contains(Fraction(1, 8))
    assert d.support_size is None
    with pytest.raises(DomainError):
        Table([4, 3, 1], geometric_ratio=HALF, geometric_from=0)


def test_table_rule_with_ratio_bound():
    d = Table(rule=lambda j: Fraction(1, 2 ** (j * (j + 1) // 2)), rule_ratio_bound=lambda j: Fraction(1, 2 ** (j + 1)))
    total = sum(Fraction(1, 2 ** (j * (j + 1) // 2)) for j in range(40))
    assert abs(d.normalizer(128).mid - 1 / total) < Fraction(1, 10**30)


def test_finite_table_support():
    d = Table([1, 1])
    assert d.support_size == 2
    assert d.weight(5) == Scalar(0)
    with pytest.raises(SupportError):
        log_pmf(d, 5)


@pytest.mark.parametrize(
    "spec",
    [
        {"kind": "heine", "lambda": "2", "q": "1/2"},
        {"kind": "poisson", "lambda": "7/2"},
        {"kind": "table", "values": ["1/2", "1/4"], "tail": {"type": "geometric", "ratio": "1/2", "from": 1}},
    ],
)
def test_json_round_trip(spec):
    d = from_json(json.dumps(spec))
    assert from_json(d.to_json()).to_json() == d.to_json()


@pytest.mark.parametrize(
    "spec",
    ['{"kind": "beta"}', "not json", '{"kind": "heine", "lambda": "1"}', '{"kind": "heine", "lambda": "1", "q": "2"}'],
)
def test_json_rejects(spec):
    with pytest.raises(DomainError):
        from_json(spec)


@pytest.mark.parametrize("args", [(0,), (-1,)])
def test_poisson_domain(args):
    with pytest.raises(DomainError):
        Poisson(*args)
