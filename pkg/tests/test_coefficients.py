import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lochom.coefficients import (HypothesisError, eval_field, find_min_hessian, local_average_c, make_spec,
                                 verify_hypotheses)
from lochom.expr import ExpressionError

C_OSC = "1 + x1^2 + sin(2*pi*y1)^2"


def spec1(a="1", b="1", c=C_OSC, dom=(-1, 1)):
    return make_spec(1, [dom], a=a, b=b, c=c)


class TestEvalField:
    def test_constant_a(self):
        s = spec1()
        assert eval_field(s, "a", 0.3, 0.7)[0, 0, 0, 0] == 1.0

    def test_c_hand_value(self):
        assert eval_field(spec1(), "c", 0.0, 0.25) == pytest.approx(2.0, abs=1e-14)

    def test_b_at_three_quarters(self):
        s = spec1(b="1/(2 + sin(2*pi*y1))")
        assert eval_field(s, "b", 0.0, 0.75)[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_wraps_y(self):
        s = spec1()
        assert eval_field(s, "c", 0.2, 3.25) == pytest.approx(eval_field(s, "c", 0.2, 0.25), abs=1e-12)

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            eval_field(spec1(), "d", 0, 0)

    def test_non_finite(self):
        s = make_spec(1, [(-1, 1)], a="1", b="1", c="1/(x1 - 0.5)", check_periodicity=False)
        with pytest.raises(FloatingPointError):
            eval_field(s, "c", 0.5, 0.0)


def test_non_periodic_rejected():
    with pytest.raises(HypothesisError):
        spec1(c="1 + y1")


def test_index_out_of_range():
    with pytest.raises(IndexError):
        make_spec(1, [(-1, 1)], a="1", b={"12": "1"}, c="1")


def test_variable_outside_dimension():
    with pytest.raises(ExpressionError):
        spec1(c="1 + x2^2")


def test_tensor_components_2d():
    s = make_spec(2, [(-1, 1), (-1, 1)], a="1", b={"11": "2", "12": "0.5", "21": "0.5", "22": "3"}, c="1")
    B = eval_field(s, "b", [0, 0], [0.1, 0.2])
    assert np.array_equal(B, [[2, 0.5], [0.5, 3]])
    A = eval_field(s, "a", [0, 0], [0, 0])
    assert np.array_equal(A.reshape(4, 4), np.eye(4))


@given(st.floats(-1, 1), st.floats(-5, 5), st.integers(-3, 3))
def test_periodicity_property(x, y, shift):
    s = spec1(b="(2 + cos(2*pi*y1))*(1 + x1^2)")
    for which in "abc":
        f0 = eval_field(s, which, x, y)
        f1 = eval_field(s, which, x, y + shift)
        assert np.max(np.abs(np.asarray(f0) - np.asarray(f1))) <= 1e-12


class TestHypotheses:
    def test_identity_a(self):
        rep = verify_hypotheses(spec1())
        assert rep.lambda_a == pytest.approx(1.0, abs=1e-12)
        assert rep.symmetry_ok and rep.ok

    def test_asymmetric_b(self):
        s = make_spec(2, [(-1, 1), (-1, 1)], a="1", b={"11": "1", "12": "0.5", "21": "0.1", "22": "1"}, c="1")
        rep = verify_hypotheses(s)
        assert not rep.symmetry_ok and not rep.ok

    def test_lambda_prime_range(self):
        rep = verify_hypotheses(spec1(b="2 + sin(2*pi*y1)"))
        assert 1.0 <= rep.lambda_b <= 3.0

    def test_negative_c_reported_not_raised(self):
        rep = verify_hypotheses(spec1(c="x1 - 2"))
        assert not rep.positivity_ok

    def test_deterministic(self):
        s = spec1(b="2 + sin(2*pi*y1)")
        assert verify_hypotheses(s, seed=3) == verify_hypotheses(s, seed=3)

    def test_samples_positive(self):
        with pytest.raises(ValueError):
            verify_hypotheses(spec1(), samples=0)


class TestLocalAverage:
    def test_y_constant(self):
        assert local_average_c(spec1(c="1 + x1^2"), [0.0]) == pytest.approx(1.0)

    def test_oscillating(self):
        assert local_average_c(spec1(), [0.0]) == pytest.approx(1.5, abs=1e-14)
        assert local_average_c(spec1(), [1.0]) == pytest.approx(2.5, abs=1e-14)

    def test_quadrature_converged(self):
        s = spec1(c="2 + x1^2 + exp(sin(2*pi*y1))")
        assert abs(local_average_c(s, [0.3], 32) - local_average_c(s, [0.3], 64)) <= 1e-10

    def test_n_quad_minimum(self):
        with pytest.raises(ValueError):
            local_average_c(spec1(), [0.0], 1)


class TestMinHessian:
    def test_quadratic_1d(self):
        st_ = find_min_hessian(spec1())
        assert st_.x_star[0] == pytest.approx(0.0, abs=1e-8)
        assert st_.c0 == pytest.approx(1.5, abs=1e-8)
        assert st_.hessian[0, 0] == pytest.approx(2.0, abs=1e-6)

    def test_start_at_minimizer(self):
        st_ = find_min_hessian(spec1(c="1 + x1^2"), x0=[0.0])
        assert st_.iterations <= 1

    def test_anisotropic_2d(self):
        s = make_spec(2, [(-1, 1), (-1, 1)], a="1", b="1", c="2 + x1^2 + 3*x2^2 + cos(2*pi*y2)")
        st_ = find_min_hessian(s)
        assert np.allclose(st_.hessian, np.diag([2.0, 6.0]), atol=1e-6)
        assert abs(st_.hessian[0, 1] - st_.hessian[1, 0]) <= 1e-10

    def test_indefinite(self):
        with pytest.raises(HypothesisError):
            find_min_hessian(spec1(c="2 - x1^2"), x0=[0.0])

    def test_x0_outside(self):
        with pytest.raises(ValueError):
            find_min_hessian(spec1(), x0=[3.0])
