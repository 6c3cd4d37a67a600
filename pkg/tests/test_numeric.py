from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import close

from logstieltjes.errors import DomainError, IndeterminateComparison, ModeError, NonConvergent
from logstieltjes.numeric import (
    Mode,
    PrecisionPolicy,
    Scalar,
    escalate,
    format_rational,
    parse_rational,
    sum_with_tail,
)

rationals = st.fractions(min_value=-100, max_value=100, max_denominator=1000)
nonzero = rationals.filter(lambda x: x != 0)


@pytest.mark.parametrize(
    "text, expected",
    [("3/7", Fraction(3, 7)), ("0.3", Fraction(3, 10)), ("1e-20", Fraction(1, 10**20)), (" -2 ", Fraction(-2))],
)
def test_parse_rational(text, expected):
    assert parse_rational(text) == expected


@pytest.mark.parametrize("bad", ["abc", "1/0", ""])
def test_parse_rational_rejects(bad):
    with pytest.raises(DomainError):
        parse_rational(bad)


@given(rationals)
def test_format_round_trips(x):
    assert parse_rational(format_rational(x)) == x


@given(rationals, nonzero)
def test_exact_arithmetic_stays_exact(x, y):
    sx, sy = Scalar(x), Scalar(y)
    assert (sx + sy).value == x + y
    assert (sx * sy).value == x * y
    assert (sx / sy).value == x / y
    assert (sx - sy).mode is Mode.EXACT


@given(rationals, nonzero)
@settings(max_examples=50)
def test_balls_enclose_exact_results(x, y):
    bx = Scalar(x).to_approx(64)
    for ball, exact in ((bx * Scalar(y), x * y), (bx / Scalar(y), x / y), (bx - y, x - y)):
        assert ball.mode is Mode.APPROX
        assert ball.contains(exact)


def test_value_requires_exact_mode():
    with pytest.raises(ModeError):
        Scalar(1).to_approx().value


def test_log_and_exp_match_mpmath():
    x = Scalar(Fraction(7, 3))
    seven_thirds = mpmath.mpf(7) / 3
    assert close(x.log(128), mpmath.log(seven_thirds), Fraction(1, 2**120))
    assert close(x.exp(128), mpmath.exp(seven_thirds), Fraction(1, 2**115))


def test_three_valued_comparison():
    wide = Scalar.ball(1, Fraction(1, 10))
    assert wide.compare(2) == -1
    assert wide.compare(1) is None
    assert wide.sign() == 1
    assert Scalar.ball(0, Fraction(1, 10)).sign() is None
    with pytest.raises(IndeterminateComparison):
        wide < 1
    assert Scalar(Fraction(1, 3)) < Scalar(Fraction(1, 2))


def test_widen_grows_the_ball():
    x = Scalar(Fraction(1, 3)).widen(Fraction(1, 100))
    assert x.contains(Fraction(1, 3) + Fraction(1, 200))
    assert x.radius >= Fraction(1, 100)


def test_sum_with_tail_geometric():
    # sum 2^-j = 2, tail after n is 2^-n
    res = sum_with_tail(lambda j: Scalar(Fraction(1, 2**j)), lambda n: Fraction(1, 2**n), Fraction(1, 10**20))
    assert res.enclosure().contains(2)
    assert res.bound <= Fraction(1, 10**20)
    assert res.value.is_exact


def test_sum_with_tail_gives_up():
    with pytest.raises(NonConvergent):
        sum_with_tail(lambda j: Scalar(1), lambda n: None, Fraction(1, 10), index_cap=50)


def test_precision_schedule_and_escalation():
    pol = PrecisionPolicy(initial_bits=64, max_bits=512)
    assert list(pol.schedule()) == [64, 128, 256, 512]
    seen = []

    def compute(bits):
        seen.append(bits)
        return Scalar.ball(1, Fraction(1, 2**bits))

    out = escalate(compute, PrecisionPolicy(64, 512, 2, Fraction(1, 2**200)))
    assert seen == [64, 128, 256]
    assert out.radius <= Fraction(1, 2**200)
