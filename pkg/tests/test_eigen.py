import numpy as np
import pytest
import scipy.sparse as sp

from lochom.eigen import (BandedSolver, FactorizationError, is_positive_definite, shift_invert_lanczos)


def laplacian(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr() * (n + 1) ** 2


def test_matches_dense():
    A = laplacian(200) + sp.diags(np.linspace(0, 50, 200))
    res = shift_invert_lanczos(A, 6)
    ref = np.linalg.eigvalsh(A.toarray())[:6]
    assert np.allclose(res.values, ref, rtol=1e-11)
    V = res.vectors
    assert np.allclose(V.T @ V, np.eye(6), atol=1e-10)
    assert res.residuals.max() <= 1e-8


def test_degenerate_needs_block():
    # two decoupled copies: every eigenvalue is double
    L = laplacian(60)
    A = sp.block_diag([L, L]).tocsr()
    res = shift_invert_lanczos(A, 4, block=2)
    ref = np.linalg.eigvalsh(A.toarray())[:4]
    assert np.allclose(res.values, ref, rtol=1e-10)
    assert res.values[1] == pytest.approx(res.values[0], rel=1e-12)


def test_lu_path_interior_shift():
    A = laplacian(100)
    ref = np.linalg.eigvalsh(A.toarray())
    res = shift_invert_lanczos(A, 3, shift=0.5 * (ref[0] + ref[1]), definite=False)
    assert np.allclose(res.values, ref[:3], rtol=1e-10)


def test_cholesky_refuses_indefinite():
    A = laplacian(50)
    lam1 = np.linalg.eigvalsh(A.toarray())[0]
    with pytest.raises(FactorizationError):
        BandedSolver(A, lam1 * 1.01)
    assert is_positive_definite(A, lam1 * 0.99)
    assert not is_positive_definite(A, lam1 * 1.01)


def test_seeded_determinism():
    A = laplacian(80)
    r1 = shift_invert_lanczos(A, 3, seed=7)
    r2 = shift_invert_lanczos(A, 3, seed=7)
    assert np.array_equal(r1.values, r2.values)


def test_k_bounds():
    with pytest.raises(ValueError):
        shift_invert_lanczos(laplacian(5), 0)
    with pytest.raises(ValueError):
        shift_invert_lanczos(laplacian(5), 6)


def test_solver_inverse(rng):
    A = laplacian(30) + sp.eye(30)
    B = rng.standard_normal((30, 3))
    X = BandedSolver(A).solve(B)
    assert np.allclose(A @ X, B)
