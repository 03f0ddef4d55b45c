"""Reference elements: quadrature rules and equispaced Lagrange bases.

Reference triangle: {(0,0), (1,0), (0,1)}.  Reference square: [-1, 1]^2.
Local node order is vertices, then edge nodes (edge k runs from vertex k to
vertex k+1), then interior nodes.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import Unsupported
from .mesh import QUAD, TRIANGLE

MAX_ORDER = 6


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def gauss_1d(n):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=None)
def line_rule(degree):
    """Gauss-Legendre on [-1, 1], exact to ``degree``."""
    n = max(1, (degree + 2) // 2)
    x, w = gauss_1d(n)
    return QuadratureRule(x, w, degree)


@lru_cache(maxsize=None)
def volume_rule(kind, degree):
    """Positive-weight rule exact to ``degree`` (total degree on triangles,
    per-variable degree on squares)."""
    if kind == QUAD:
        x, w = line_rule(degree).points, line_rule(degree).weights
        X, Y = np.meshgrid(x, x, indexing="ij")
        return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]),
                              np.outer(w, w).ravel(), degree)
    # collapsed tensor Gauss rule; the collapse adds one degree in eta
    a, wa = line_rule(degree).points, line_rule(degree).weights
    b, wb = line_rule(degree + 1).points, line_rule(degree + 1).weights
    A, B = np.meshgrid(a, b, indexing="ij")
    xi = 0.25 * (1 + A) * (1 - B)
    eta = 0.5 * (1 + B)
    w = np.outer(wa, wb) * (1 - B) / 8.0
    return QuadratureRule(np.column_stack([xi.ravel(), eta.ravel()]), w.ravel(), degree)


def reference_vertices(kind):
    if kind == TRIANGLE:
        return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _silvester(z, m):
    """R_m(z) = prod_{l<m} (z - l)/(l + 1) and its derivative."""
    val = np.ones_like(z)
    der = np.zeros_like(z)
    for l in range(m):
        fac = (z - l) / (l + 1)
        der = der * fac + val / (l + 1)
        val = val * fac
    return val, der


def _lagrange_1d(x, nodes, k):
    val = np.ones_like(x)
    der = np.zeros_like(x)
    for m, xm in enumerate(nodes):
        if m == k:
            continue
        d = nodes[k] - xm
        der = der * (x - xm) / d + val / d
        val = val * (x - xm) / d
    return val, der


class LagrangeBasis:
    """Equispaced Lagrange basis of order ``p`` on a reference element."""

    def __init__(self, kind, p):
        if not 1 <= p <= MAX_ORDER:
            raise Unsupported(f"polynomial order {p} outside 1..{MAX_ORDER}")
        self.kind = kind
        self.p = p
        if kind == TRIANGLE:
            self._index = self._triangle_indices(p)
            self.nodes = self._index[:, 1:] / p
        else:
            self._index = self._quad_indices(p)
            self._nodes_1d = np.linspace(-1.0, 1.0, p + 1)
            self.nodes = self._nodes_1d[self._index]
        self.n_vertices = 3 if kind == TRIANGLE else 4
        self.n_edge_nodes = p - 1
        self.n_interior = len(self.nodes) - self.n_vertices * (1 + self.n_edge_nodes)

    @property
    def size(self):
        return len(self.nodes)

    @staticmethod
    def _triangle_indices(p):
        verts = [(p, 0, 0), (0, p, 0), (0, 0, p)]
        out = list(verts)
        for k in range(3):
            for m in range(1, p):
                idx = [0, 0, 0]
                idx[k] = p - m
                idx[(k + 1) % 3] = m
                out.append(tuple(idx))
        for i2 in range(1, p):
            for i1 in range(1, p - i2):
                out.append((p - i1 - i2, i1, i2))
        return np.array(out, dtype=np.int64)

    @staticmethod
    def _quad_indices(p):
        out = [(0, 0), (p, 0), (p, p), (0, p)]
        for m in range(1, p):
            out.append((m, 0))
        for m in range(1, p):
            out.append((p, m))
        for m in range(1, p):
            out.append((p - m, p))
        for m in range(1, p):
            out.append((0, p - m))
        for j in range(1, p):
            for i in range(1, p):
                out.append((i, j))
        return np.array(out, dtype=np.int64)

    def edge_local_nodes(self, k):
        """Local indices of the interior nodes of edge ``k``, from vertex k onward."""
        start = self.n_vertices + k * self.n_edge_nodes
        return np.arange(start, start + self.n_edge_nodes)

    def eval(self, ref):
        """Values ``(..., nb)`` and reference gradients ``(..., nb, 2)``."""
        ref = np.asarray(ref, dtype=float)
        if self.kind == TRIANGLE:
            return self._eval_triangle(ref)
        return self._eval_quad(ref)

    def _eval_triangle(self, ref):
        p = self.p
        lam = np.stack([1 - ref[..., 0] - ref[..., 1], ref[..., 0], ref[..., 1]], axis=-1)
        # d(lambda)/d(xi, eta)
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        R = np.empty(lam.shape + (p + 1,))
        dR = np.empty_like(R)
        for m in range(p + 1):
            R[..., m], dR[..., m] = _silvester(p * lam, m)
        idx = self._index
        f = [R[..., k, idx[:, k]] for k in range(3)]
        df = [p * dR[..., k, idx[:, k]] for k in range(3)]
        val = f[0] * f[1] * f[2]
        grad = np.zeros(val.shape + (2,))
        for k in range(3):
            others = f[(k + 1) % 3] * f[(k + 2) % 3]
            grad += (df[k] * others)[..., None] * dlam[k]
        return val, grad

    def _eval_quad(self, ref):
        p = self.p
        L = np.empty(ref.shape[:-1] + (2, p + 1))
        dL = np.empty_like(L)
        for k in range(p + 1):
            for d in range(2):
                L[..., d, k], dL[..., d, k] = _lagrange_1d(ref[..., d], self._nodes_1d, k)
        i, j = self._index[:, 0], self._index[:, 1]
        lx, ly = L[..., 0, i], L[..., 1, j]
        val = lx * ly
        grad = np.stack([dL[..., 0, i] * ly, lx * dL[..., 1, j]], axis=-1)
        return val, grad


@lru_cache(maxsize=None)
def lagrange_basis(kind, p):
    return LagrangeBasis(kind, p)
