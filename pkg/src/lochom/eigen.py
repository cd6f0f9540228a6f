"""Shift-invert Lanczos on banded symmetric matrices.

The shifted matrix is factored once in LAPACK band storage (Cholesky when it
is positive definite, LU otherwise) and the Lanczos recursion runs on its
inverse with full reorthogonalization.  Block size 1 is the default; larger
blocks are used where exactly degenerate eigenvalues are expected (symmetric
2D problems), since a single start vector only sees one copy of each
eigenvalue in exact arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .fd import matrix_bandwidth


class FactorizationError(np.linalg.LinAlgError):
    pass


class LanczosError(RuntimeError):
    pass


class BandedSolver:
    """Factor ``A - shift*I`` once; ``solve`` applies its inverse to blocks."""

    def __init__(self, A: sp.spmatrix, shift: float = 0.0, definite: bool = True):
        A = sp.csr_matrix(A)
        n = A.shape[0]
        self.n = n
        self.shift = float(shift)
        self.definite = definite
        kd = matrix_bandwidth(A)
        self.kd = kd
        M = sp.coo_matrix(A - self.shift * sp.eye(n))
        if definite:
            ab = np.zeros((kd + 1, n))
            low = M.row >= M.col
            ab[M.row[low] - M.col[low], M.col[low]] = M.data[low]
            c, info = lapack.dpbtrf(ab, lower=1)
            if info != 0:
                raise FactorizationError(
                    f"banded Cholesky failed at column {info}: matrix minus shift is not positive definite"
                )
            self._chol = c
        else:
            # general band storage for gbtrf: kl extra rows on top for fill-in
            ab = np.zeros((3 * kd + 1, n))
            ab[2 * kd + M.row - M.col, M.col] = M.data
            lu, piv, info = lapack.dgbtrf(ab, kd, kd)
            if info != 0:
                raise FactorizationError(f"banded LU hit an exact zero pivot at {info}")
            self._lu, self._piv = lu, piv

    def solve(self, B: np.ndarray) -> np.ndarray:
        B = np.asarray(B, dtype=float)
        if self.definite:
            x, info = lapack.dpbtrs(self._chol, B, lower=1)
        else:
            x, info = lapack.dgbtrs(self._lu, self.kd, self.kd, B, self._piv)
        if info != 0:
            raise FactorizationError(f"banded solve failed (info={info})")
        return x


def is_positive_definite(A: sp.spmatrix, shift: float) -> bool:
    """Cholesky test of ``A - shift*I``: True iff every eigenvalue exceeds ``shift``."""
    try:
        BandedSolver(A, shift, definite=True)
    except FactorizationError:
        return False
    return True


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray  # (n, K), orthonormal columns
    residuals: np.ndarray  # ||A v - lambda v|| / max(1, |lambda|)
    iterations: int
    basis_size: int
    shift: float
    info: dict = field(default_factory=dict)


def _orthonormalize(W, Q, reorth=2):
    for _ in range(reorth):
        if Q is not None and Q.shape[1]:
            W = W - Q @ (Q.T @ W)
    Qn, R = np.linalg.qr(W)
    # drop numerically dependent directions
    keep = np.abs(np.diag(R)) > 1e-10 * max(1.0, np.abs(R).max())
    return Qn[:, keep], R[keep]


def shift_invert_lanczos(A: sp.spmatrix, k: int, shift: float = 0.0, *, definite: bool = True,
                         block: int = 1, seed: int = 0, tol: float = 1e-12,
                         max_basis: int | None = None) -> EigenResult:
    """The ``k`` smallest eigenpairs of symmetric ``A`` among those nearest ``shift``.

    Ritz values ``theta`` of ``(A - shift)^{-1}`` with the largest magnitude are
    mapped back by ``lambda = shift + 1/theta``.  With ``definite=True`` the
    shift must lie below the spectrum, so these are the bottom eigenvalues.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"requested {k} eigenpairs of a {n}x{n} matrix")
    solver = BandedSolver(A, shift, definite=definite)
    rng = np.random.default_rng(seed)
    want = k if definite else min(n, k + 2)
    if max_basis is None:
        max_basis = min(n, max(8 * want + 40, 60) * block)
    Q, _ = _orthonormalize(rng.standard_normal((n, block)), None)
    basis = Q
    T = np.zeros((0, 0))
    it = 0
    converged = False
    while True:
        it += 1
        W = solver.solve(Q)
        # projected operator grows by one block (full reorthogonalization)
        C = basis.T @ W
        m_old = T.shape[0]
        m = basis.shape[1]
        T_new = np.zeros((m, m))
        T_new[:m_old, :m_old] = T
        T_new[:, m_old:m] = C
        T_new[m_old:m, :] = C.T
        T = 0.5 * (T_new + T_new.T)
        R = W - basis @ C
        Qn, _ = _orthonormalize(R, basis)
        # Ritz check
        if m >= want or Qn.shape[1] == 0 or m + Qn.shape[1] > max_basis:
            theta, S = np.linalg.eigh(T)
            order = np.argsort(-np.abs(theta))[:want]
            # Op y - theta y = R s_last for the Ritz vector y = basis s
            est = np.linalg.norm(R @ S[m_old:m, order], axis=0)
            if len(order) >= want and np.all(est <= tol * np.abs(theta[order])):
                converged = True
            if converged or Qn.shape[1] == 0 or m + Qn.shape[1] > max_basis:
                break
        basis = np.hstack([basis, Qn])
        Q = Qn
    theta = theta[order]
    vecs = basis @ S[:, order]
    lam = shift + 1.0 / theta
    idx = np.argsort(lam)[:k]
    lam, vecs = lam[idx], vecs[:, idx]
    # Rayleigh-quotient refinement and true residuals
    AV = A @ vecs
    lam = np.einsum("ij,ij->j", vecs, AV) / np.einsum("ij,ij->j", vecs, vecs)
    res = np.linalg.norm(AV - vecs * lam, axis=0) / np.maximum(1.0, np.abs(lam))
    if not converged:
        raise LanczosError(
            f"Lanczos did not converge within a basis of {basis.shape[1]} vectors "
            f"(max residual estimate {np.max(est / np.abs(theta)):.2e})"
        )
    order = np.argsort(lam)
    return EigenResult(lam[order], vecs[:, order], res[order], it, basis.shape[1], shift,
                       {"block": block, "factorization": "cholesky" if definite else "lu"})
