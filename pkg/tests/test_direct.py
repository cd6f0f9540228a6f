import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from lochom.coefficients import make_spec
from lochom.direct import (DirectProblem, ResolutionError, assemble_direct, potential_lower_bound,
                           rescale_eigenfunction, solve_direct)
from lochom.fd import BoxGrid
from lochom.regions import ParameterPoint

R2 = ParameterPoint.of("1/3", 1)


def osc_spec():
    return make_spec(1, [(-1, 1)], a="1/(2 + sin(2*pi*y1))", b="2 + sin(2*pi*y1)",
                     c="1 + x1^2 + sin(2*pi*y1)^2")


def test_resolution_rule():
    with pytest.raises(ResolutionError):
        DirectProblem(osc_spec(), R2, 1 / 8, 200)
    assert DirectProblem.min_intervals(1 / 8, osc_spec().domain) == 256


def test_constant_coefficients_stencils():
    s = make_spec(1, [(-1, 1)], a="1", b="1", c="1")
    prob = DirectProblem(s, ParameterPoint.of(0, 1), 1.0, 32)
    M = assemble_direct(prob).toarray()
    h = prob.grid.h[0]
    expected = (np.array([1, -4, 6, -4, 1]) / h**4 + np.array([0, -1, 2, -1, 0]) / h**2
                + np.array([0, 0, 1, 0, 0]))
    assert np.allclose(M[10, 8:13], expected)


def test_symmetric_exactly():
    M = assemble_direct(DirectProblem(osc_spec(), R2, 1 / 8, 256))
    assert (M != M.T).nnz == 0


def test_potential_lower_bound():
    prob = DirectProblem(osc_spec(), R2, 1 / 8, 256)
    res = solve_direct(prob, 1)
    assert res.values[0] > potential_lower_bound(prob)


def test_dense_oracle_constant():
    s = make_spec(1, [(-1, 1)], a="1", b="1", c="1 + x1^2")
    prob = DirectProblem(s, R2, 1 / 8, 256)
    A = assemble_direct(prob).toarray()
    ref = np.sort(1.0 / sla.eigvalsh(sla.cho_solve(sla.cho_factor(A), np.eye(len(A)))))[:5]
    res = solve_direct(prob, 5)
    assert np.max(np.abs(res.values - ref) / ref) <= 1e-9


def test_min_max(rng):
    prob = DirectProblem(osc_spec(), R2, 1 / 8, 256)
    M = assemble_direct(prob)
    lam1 = solve_direct(prob, 1).values[0]
    V = rng.standard_normal((M.shape[0], 100))
    V += 0.5 * np.sin(np.linspace(0, np.pi, M.shape[0]))[:, None] * 10
    q = np.einsum("ij,ij->j", V, M @ V) / np.einsum("ij,ij->j", V, V)
    assert np.all(lam1 <= q * (1 + 1e-12))


def test_orthogonality_and_normalization():
    prob = DirectProblem(osc_spec(), R2, 1 / 16, 512)
    res = solve_direct(prob, 3)
    assert np.allclose(res.gram(), np.eye(3), atol=1e-8)
    assert res.diagnostics["bottom_certified"]


def test_lu_retry_path():
    # with c0 placed above the bottom of the spectrum the Cholesky test fails
    s = make_spec(1, [(-1, 1)], a="1", b="1", c="1 + x1^2 + sin(2*pi*y1)^2")
    prob = DirectProblem(s, ParameterPoint.of(0.9, 1), 1 / 8, 256)
    res = solve_direct(prob, 2)
    modes = [a["mode"] for a in res.diagnostics["attempts"]]
    A = assemble_direct(prob).toarray()
    ref = np.linalg.eigvalsh(A)[:2]
    assert np.allclose(res.values, ref, rtol=1e-8)
    assert modes  # at least one attempt recorded
    assert res.diagnostics["bottom_certified"]


def test_k_positive():
    with pytest.raises(ValueError):
        solve_direct(DirectProblem(osc_spec(), R2, 1 / 8, 256), 0)


class TestRescale:
    def test_identity(self):
        g = BoxGrid.cube(1.0, 32, 1)
        u = np.sin(np.pi * (g.inner_points()[:, 0] + 1) / 2)
        v = rescale_eigenfunction(u, g, 0.0, 0.1, [0.0])
        assert np.array_equal(v.values, u)

    def test_gaussian(self):
        eps, gamma = 1e-6, 1 / 6  # scale 0.1, well inside the box
        s = eps**gamma
        g = BoxGrid.cube(1.0, 2048, 1)
        x = g.inner_points()[:, 0]
        u = np.exp(-x**2 / (2 * s * s))
        w = g.h[0]
        assert w * np.sum(u**2) == pytest.approx(s * np.sqrt(np.pi), rel=1e-6)
        z = np.linspace(-6, 6, 1201)
        v = rescale_eigenfunction(u, g, gamma, eps, [0.0], [z])
        assert np.max(np.abs(v.values - np.exp(-z**2 / 2))) <= 1e-3
        assert v.norm_squared() == pytest.approx(np.sqrt(np.pi), rel=1e-3)

    def test_no_overlap(self):
        g = BoxGrid.cube(1.0, 32, 1)
        with pytest.raises(ValueError):
            rescale_eigenfunction(np.ones(31), g, 0.5, 0.01, [0.0], [np.linspace(100, 200, 5)])


def test_spectrum_dict_keys():
    res = solve_direct(DirectProblem(osc_spec(), R2, 1 / 8, 256), 2)
    d = res.to_dict()
    assert set(d) >= {"eps", "eigenvalues", "eta", "shift", "scaling", "diagnostics"}
    assert len(d["eta"]) == 2


def test_matrix_is_sparse_banded():
    M = assemble_direct(DirectProblem(osc_spec(), R2, 1 / 8, 256))
    assert sp.issparse(M)
    coo = M.tocoo()
    assert np.max(np.abs(coo.row - coo.col)) == 2
