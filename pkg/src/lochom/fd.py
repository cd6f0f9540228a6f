"""Finite-difference assembly on boxes with clamped (u = du/dn = 0) boundaries.

Every operator is assembled from its quadratic form,

    A = sum_terms D_p^T diag(w * coef) D_q,

so the matrix is symmetric by construction.  Unknowns are the interior nodes
of a tensor grid (x fastest); boundary values are zero.  Second derivatives
live on all nodes, the zero-slope condition entering through a mirror ghost
node; first derivatives along an axis live on edge midpoints, mixed first
derivatives on cell centers.  Weights are the trapezoid weights divided by
``h^d`` so that the L2 inner product of interior unknowns is the Euclidean one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class BoxGrid:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    intervals: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lo) == len(self.hi) == len(self.intervals)):
            raise ValueError("inconsistent box grid")
        if any(n < 4 for n in self.intervals):
            raise ValueError("need at least 4 intervals per dimension")

    @classmethod
    def cube(cls, half_width: float, n: int, dim: int, center=None):
        c = np.zeros(dim) if center is None else np.asarray(center, float)
        return cls(tuple(c - half_width), tuple(c + half_width), (n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def h(self) -> np.ndarray:
        return (np.asarray(self.hi) - np.asarray(self.lo)) / np.asarray(self.intervals)

    @property
    def n_inner(self) -> tuple[int, ...]:
        return tuple(n - 1 for n in self.intervals)

    @property
    def size(self) -> int:
        return int(np.prod(self.n_inner))

    @property
    def bandwidth(self) -> int:
        """Half bandwidth of the assembled fourth-order operator."""
        if self.dim == 1:
            return 2
        return 2 * self.n_inner[0] + 2

    def axis_nodes(self, axis: int) -> np.ndarray:
        return self.lo[axis] + self.h[axis] * np.arange(self.intervals[axis] + 1)

    def inner_points(self) -> np.ndarray:
        """Interior node coordinates, shape ``(size, d)``, x index fastest."""
        axes = [self.axis_nodes(a)[1:-1] for a in range(self.dim)]
        mesh = np.meshgrid(*axes[::-1], indexing="ij")[::-1]
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def as_array(self, v: np.ndarray) -> np.ndarray:
        """Reshape a vector of interior values to ``n_inner`` (axis order x, y)."""
        return np.asarray(v).reshape(self.n_inner[::-1]).T

    # ----------------------------------------------------------------------
    # point sets

    def _points(self, kinds) -> np.ndarray:
        axes = []
        for a, kind in enumerate(kinds):
            nodes = self.axis_nodes(a)
            axes.append(nodes if kind == "node" else 0.5 * (nodes[1:] + nodes[:-1]))
        mesh = np.meshgrid(*axes[::-1], indexing="ij")[::-1]
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def _weights(self, kinds) -> np.ndarray:
        ws = []
        for a, kind in enumerate(kinds):
            n = self.intervals[a]
            if kind == "node":
                w = np.ones(n + 1)
                w[[0, -1]] = 0.5
            else:
                w = np.ones(n)
            ws.append(w)
        out = ws[-1]
        for w in ws[-2::-1]:
            out = np.multiply.outer(out, w)
        return out.ravel()

    @cached_property
    def node_points(self):
        return self._points(["node"] * self.dim)

    @cached_property
    def node_weights(self):
        return self._weights(["node"] * self.dim)

    def edge_points(self, axis):
        return self._points(["mid" if a == axis else "node" for a in range(self.dim)])

    def edge_weights(self, axis):
        return self._weights(["mid" if a == axis else "node" for a in range(self.dim)])

    def cell_points(self):
        return self._points(["mid"] * self.dim)

    def cell_weights(self):
        return self._weights(["mid"] * self.dim)

    # ----------------------------------------------------------------------
    # 1D building blocks (maps interior unknowns -> values)

    def _embed(self, axis):
        """Nodes 0..n from interior unknowns (zero at boundary)."""
        n = self.intervals[axis]
        return sp.eye(n + 1, n - 1, k=-1, format="csr")

    def _d2_nodes(self, axis):
        """Second difference at all nodes with mirror ghosts (zero slope)."""
        n = self.intervals[axis]
        h = self.h[axis]
        E = self._embed(axis).tolil()
        main = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n + 1, n + 1), format="lil")
        main[0, 1] = 2.0
        main[n, n - 1] = 2.0
        return (main.tocsr() @ E.tocsr()) / h**2

    def _d1_mid(self, axis):
        n = self.intervals[axis]
        h = self.h[axis]
        D = sp.diags([-1.0, 1.0], [0, 1], shape=(n, n + 1), format="csr")
        return (D @ self._embed(axis)) / h

    def _d1_nodes(self, axis):
        """Central first difference at all nodes, mirror ghosts (zero at boundary)."""
        n = self.intervals[axis]
        h = self.h[axis]
        D = sp.diags([-0.5, 0.5], [-1, 1], shape=(n + 1, n + 1), format="lil")
        D[0, 1] = 0.0
        D[n, n - 1] = 0.0
        return (D.tocsr() @ self._embed(axis)) / h

    def _avg_mid(self, axis):
        n = self.intervals[axis]
        A = sp.diags([0.5, 0.5], [0, 1], shape=(n, n + 1), format="csr")
        return A @ self._embed(axis)

    def _kron(self, factors):
        """Tensor product of per-axis operators, axis 0 fastest."""
        out = factors[-1]
        for f in factors[-2::-1]:
            out = sp.kron(out, f, format="csr")
        return out

    # ----------------------------------------------------------------------
    # derivative operators

    def hessian_ops(self):
        """``{(i, j): D_ij}`` mapping interior unknowns to node values."""
        d = self.dim
        ops = {}
        for i in range(d):
            for j in range(d):
                factors = []
                for a in range(d):
                    if i == j == a:
                        factors.append(self._d2_nodes(a))
                    elif a in (i, j) and i != j:
                        factors.append(self._d1_nodes(a))
                    else:
                        factors.append(self._embed(a))
                ops[(i, j)] = self._kron(factors)
        return ops

    def value_op(self):
        return self._kron([self._embed(a) for a in range(self.dim)])

    def edge_gradient_op(self, axis):
        return self._kron([self._d1_mid(a) if a == axis else self._embed(a) for a in range(self.dim)])

    def cell_gradient_ops(self):
        ops = []
        for i in range(self.dim):
            ops.append(self._kron([self._d1_mid(a) if a == i else self._avg_mid(a) for a in range(self.dim)]))
        return ops

    # ----------------------------------------------------------------------
    # assembly

    def fourth_order(self, a_nodes: np.ndarray) -> sp.csr_matrix:
        """Form ``sum w a_{ij,kl} D_ij v D_kl v``; ``a_nodes`` is ``(n_nodes, d*d, d*d)``."""
        d = self.dim
        H = self.hessian_ops()
        w = self.node_weights
        A = sp.csr_matrix((self.size, self.size))
        for (i, j), Dij in H.items():
            for (k, l), Dkl in H.items():
                coef = a_nodes[:, i * d + j, k * d + l]
                if not np.any(coef):
                    continue
                A = A + Dij.T @ sp.diags(w * coef) @ Dkl
        return A

    def second_order(self, b_edges, b_cells=None) -> sp.csr_matrix:
        """Form ``sum w b_ij d_i v d_j v``.

        ``b_edges`` is a list with, for each axis, the diagonal entry ``b_ii``
        sampled at that axis' edge midpoints; ``b_cells`` is ``(n_cells, d, d)``
        (off-diagonal entries at cell centers) or None.
        """
        A = sp.csr_matrix((self.size, self.size))
        for axis in range(self.dim):
            D = self.edge_gradient_op(axis)
            A = A + D.T @ sp.diags(self.edge_weights(axis) * b_edges[axis]) @ D
        if b_cells is not None and self.dim > 1:
            G = self.cell_gradient_ops()
            w = self.cell_weights()
            for i in range(self.dim):
                for j in range(self.dim):
                    if i == j:
                        continue
                    coef = b_cells[:, i, j]
                    if np.any(coef):
                        A = A + G[i].T @ sp.diags(w * coef) @ G[j]
        return A

    def potential(self, v_inner: np.ndarray) -> sp.csr_matrix:
        """Diagonal multiplication (interior nodes have unit weight)."""
        return sp.diags(np.asarray(v_inner, float))

    def symmetrized(self, A) -> sp.csr_matrix:
        A = sp.csr_matrix(A)
        A = 0.5 * (A + A.T)
        A.sum_duplicates()
        A.eliminate_zeros()
        return A.tocsr()


def to_banded_lower(A: sp.spmatrix, bandwidth: int) -> np.ndarray:
    """Lower banded storage ``ab[i - j, j] = A[i, j]`` as used by LAPACK ``pbtrf``."""
    A = sp.coo_matrix(A)
    n = A.shape[0]
    ab = np.zeros((bandwidth + 1, n))
    mask = (A.row >= A.col) & (A.row - A.col <= bandwidth)
    if np.any(np.abs(A.row - A.col) > bandwidth):
        raise ValueError("matrix has entries outside the stated bandwidth")
    ab[A.row[mask] - A.col[mask], A.col[mask]] = A.data[mask]
    return ab


def matrix_bandwidth(A: sp.spmatrix) -> int:
    A = sp.coo_matrix(A)
    if A.nnz == 0:
        return 0
    return int(np.max(np.abs(A.row - A.col)))
