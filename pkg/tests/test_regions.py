from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lochom.regions import (EffectiveForm, ParameterPoint, Region, UnsupportedRegion, classify, parse_decimal,
                            scaling)

P = ParameterPoint.of


@pytest.mark.parametrize("a, b, region", [
    ("1/3", 1, Region.R2), (2, 3, Region.R4), (0.5, 3.5, Region.HATCHED), (1, 2.5, Region.R3),
    (0, 2, Region.R1), (3, 3.5, Region.R5), (2, 2, Region.CLASSICAL), (1, 4, Region.CRITICAL),
    (3.5, 0.5, Region.UNSUPPORTED),
])
def test_examples(a, b, region):
    assert classify(P(a, b)) is region


def test_r2_exponents():
    s = scaling(P("1/3", 1), 1)
    assert (s.shift_exponent, s.gamma, s.norm_exponent) == pytest.approx((1, 1 / 6, 1 / 6))
    assert s.eta_exponent == pytest.approx(2 / 3)
    assert s.form is EffectiveForm.FOURTH_PLUS_SECOND


def test_r1_exponents():
    s = scaling(P(0, 2), 1)
    assert (s.shift_exponent, s.eta_exponent, s.gamma) == pytest.approx((2, 4 / 3, 1 / 3))
    assert s.form is EffectiveForm.FOURTH


def test_r5_exponents_2d():
    s = scaling(P(3, 3.5), 2)
    assert (s.shift_exponent, s.eta_exponent, s.gamma, s.norm_exponent) == pytest.approx((3.5, 3.25, 0.125, 0.25))
    assert s.form is EffectiveForm.SECOND


def test_unsupported_raises():
    with pytest.raises(UnsupportedRegion, match="Classical"):
        scaling(P(2, 2), 1)


def test_invalid_points():
    with pytest.raises(ValueError):
        P(-0.1, 1)
    with pytest.raises(ValueError):
        P(1, 0)


def test_float_boundary_is_r2():
    # 1/3 in binary differs from the exact rational; tolerance resolves it
    assert classify(ParameterPoint(1 / 3, 1.0)) is Region.R2
    assert classify(ParameterPoint(0.3333333333, 1.0)) is not Region.R2


def test_exact_rational_boundary():
    p = ParameterPoint(Fraction(1, 3), Fraction(1))
    assert p.exact and classify(p) is Region.R2


@pytest.mark.parametrize("text, value", [("0.3333333333", Fraction(1, 3)), ("0.3", Fraction(3, 10)),
                                         ("0.6666666667", Fraction(2, 3)), ("1e-3", Fraction(1, 1000)),
                                         ("2", Fraction(2))])
def test_parse_decimal(text, value):
    assert parse_decimal(text) == value


@given(st.floats(0.01, 0.99))
def test_line_beta_3alpha_is_r2(a):
    assert classify(ParameterPoint(a, 3 * a)) is Region.R2


@given(st.floats(0, 4), st.floats(1e-6, 4))
def test_exponent_positivity(a, b):
    p = ParameterPoint(a, b)
    if classify(p).supported:
        s = scaling(p, 1)
        assert s.gamma > 0
        assert s.eta_exponent < s.shift_exponent


def test_labels_cover_grid():
    # every point gets exactly one label, and labels are total
    for a in np.linspace(0, 4, 41):
        for b in np.linspace(0.1, 4, 40):
            assert isinstance(classify(ParameterPoint(float(a), float(b))), Region)
