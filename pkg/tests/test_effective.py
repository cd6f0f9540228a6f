import math

import numpy as np
import pytest

from lochom.cells import TorusGrid, solve_cell_fourth, solve_cell_mixed, solve_cell_second
from lochom.coefficients import find_min_hessian, make_spec
from lochom.effective import (AssemblyError, EffectiveOperator, assemble_a_eff, assemble_b_eff,
                              build_effective_operator, check_coercive, solve_required_cells)
from lochom.regions import EffectiveForm, ParameterPoint, Region, UnsupportedRegion, scaling

from conftest import HARMONIC

G1 = TorusGrid(1, 32)


def spec1(a="1", b="1", c="1 + x1^2 + sin(2*pi*y1)^2"):
    return make_spec(1, [(-1, 1)], a=a, b=b, c=c)


def test_constant_a_exact():
    s = spec1(a="2.5")
    assert assemble_a_eff(solve_cell_fourth(s, [0], G1), s).value[0, 0] == 2.5


def test_harmonic_a():
    s = spec1(a=HARMONIC)
    assert assemble_a_eff(solve_cell_fourth(s, [0], G1), s).value[0, 0] == pytest.approx(0.5, abs=1e-8)


def test_b_regions():
    s = spec1(b=HARMONIC)
    b5 = assemble_b_eff(Region.R5, solve_cell_second(s, [0], G1), s, [0]).value[0, 0]
    b3 = assemble_b_eff(Region.R3, None, s, [0], G1).value[0, 0]
    assert b5 == pytest.approx(0.5, abs=1e-8)
    assert b3 == pytest.approx(1 / math.sqrt(3), abs=1e-8)
    assert b5 <= b3


def test_b_constant_any_region():
    s = spec1(b="1.7")
    for region, cell in [(Region.R2, None), (Region.R3, None), (Region.R4, solve_cell_mixed(s, [0], G1)),
                         (Region.R5, solve_cell_second(s, [0], G1))]:
        assert assemble_b_eff(region, cell, s, [0], G1).value[0, 0] == pytest.approx(1.7, abs=1e-14)


def test_region_corrector_mismatch():
    s = spec1(b=HARMONIC)
    with pytest.raises(AssemblyError):
        assemble_b_eff(Region.R4, solve_cell_second(s, [0], G1), s, [0])
    with pytest.raises(AssemblyError):
        assemble_a_eff(solve_cell_second(s, [0], G1), s)


def test_energy_form_2d():
    s = make_spec(2, [(-1, 1), (-1, 1)], a="1 + 0.3*sin(2*pi*y1)*cos(2*pi*y2)",
                  b="2 + cos(2*pi*y1) + 0.5*sin(2*pi*(y1 + y2))", c="1 + x1^2 + x2^2")
    g = TorusGrid(2, 24)
    a = assemble_a_eff(solve_cell_fourth(s, [0, 0], g), s)
    b4 = assemble_b_eff(Region.R4, solve_cell_mixed(s, [0, 0], g), s, [0, 0])
    b5 = assemble_b_eff(Region.R5, solve_cell_second(s, [0, 0], g), s, [0, 0])
    assert a.energy_gap <= 1e-10 and b4.energy_gap <= 1e-10 and b5.energy_gap <= 1e-10
    assert a.asymmetry <= 1e-8


class TestCoercive:
    def test_identity_rank4(self):
        assert check_coercive(np.eye(4).reshape(2, 2, 2, 2)).min_quotient == pytest.approx(1.0)

    def test_scalar(self):
        assert check_coercive(np.array([[0.5]])).min_quotient == 0.5

    def test_asymmetric(self):
        with pytest.raises(ValueError):
            check_coercive([[1, 2], [0, 1]])

    def test_minimum_below_samples(self, rng):
        s = make_spec(2, [(-1, 1), (-1, 1)], a="1 + 0.3*sin(2*pi*y1)*cos(2*pi*y2)", b="1", c="1 + x1^2 + x2^2")
        A = assemble_a_eff(solve_cell_fourth(s, [0, 0], TorusGrid(2, 16)), s).value
        cert = check_coercive(A)
        xi = rng.standard_normal((10_000, 4))
        q = np.einsum("si,ij,sj->s", xi, A, xi) / np.einsum("si,si->s", xi, xi)
        assert 0 < cert.min_quotient <= q.min() + 1e-14


@pytest.mark.parametrize("alpha, beta, form", [
    (0.5, 2, EffectiveForm.FOURTH), ("1/3", 1, EffectiveForm.FOURTH_PLUS_SECOND), (1, 2.5, EffectiveForm.SECOND),
    (2, 3, EffectiveForm.SECOND), (3, 3.5, EffectiveForm.SECOND),
])
def test_operator_form_per_region(alpha, beta, form):
    s = spec1(a=HARMONIC, b="2 + sin(2*pi*y1)")
    sc = scaling(ParameterPoint.of(alpha, beta), 1)
    stats = find_min_hessian(s)
    op = build_effective_operator(sc, s, solve_required_cells(sc, s, stats.x_star, G1), stats, G1)
    assert op.form is form
    assert (op.a_eff is None) == (form is EffectiveForm.SECOND)
    assert (op.b_eff is None) == (form is EffectiveForm.FOURTH)
    if sc.region is Region.R3:
        assert op.b_eff[0, 0] == pytest.approx(2.0, abs=1e-12)


def test_missing_cells():
    s = spec1()
    sc = scaling(ParameterPoint.of(0.5, 2), 1)
    with pytest.raises(AssemblyError):
        build_effective_operator(sc, s, {}, find_min_hessian(s))


def test_unsupported_assembly():
    with pytest.raises(UnsupportedRegion):
        assemble_b_eff(Region.HATCHED, None, spec1(), [0])


def test_constant_operator_validation():
    with pytest.raises(ValueError):
        EffectiveOperator.constant(EffectiveForm.SECOND, 1, a_eff=1.0)
