"""Continuous vector-valued Lagrange spaces on space-time meshes.

Coefficient vectors are flat and component-major: all scalar dofs of
component 0, then component 1, and so on.  Basis data arrays carry a last axis
of length 3 holding (value, d/dt, d/dx).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .basis import lagrange_basis, line_rule, reference_vertices, volume_rule
from .errors import InvalidArgument, NumericError, Unsupported
from .kernels import eval_fields
from .mesh import Tag


@dataclass(frozen=True)
class PointData:
    """Basis data at a batch of quadrature points grouped by element.

    ``elements``: (ne,) element ids; ``weights``: (ne, nq) physical weights;
    ``points``: (ne, nq, 2) physical (x, t); ``basis``: (ne, nq, nb, 3).
    """
    elements: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    basis: np.ndarray
    normals: np.ndarray | None = None


class FeSpace:
    def __init__(self, mesh, p, n_components=1):
        if n_components < 1:
            raise InvalidArgument("component count must be positive")
        self.mesh = mesh
        self.p = int(p)
        self.N = int(n_components)
        self.basis = lagrange_basis(mesh.kind, self.p)
        self._build_dofs()

    def _build_dofs(self):
        mesh, b, p = self.mesh, self.basis, self.p
        nn = mesh.n_nodes
        ned = len(mesh.edges)
        nv = b.n_vertices
        dofs = np.empty((mesh.n_elements, b.size), dtype=np.int64)
        dofs[:, :nv] = mesh.cells
        if p > 1:
            ce = mesh.cell_edges
            for k in range(nv):
                a = mesh.cells[:, k]
                c = mesh.cells[:, (k + 1) % nv]
                base = nn + ce[:, k] * (p - 1)
                m = np.arange(p - 1)
                fwd = base[:, None] + m[None]
                rev = base[:, None] + (p - 2 - m)[None]
                dofs[:, b.edge_local_nodes(k)] = np.where((a < c)[:, None], fwd, rev)
        ni = b.n_interior
        if ni:
            start = nn + ned * (p - 1)
            dofs[:, b.size - ni:] = start + np.arange(mesh.n_elements)[:, None] * ni + np.arange(ni)
        self.element_dofs = dofs
        self.n_scalar = nn + ned * (p - 1) + mesh.n_elements * ni

    @property
    def ndof(self):
        return self.N * self.n_scalar

    def components(self, coeffs):
        """``(N, n_scalar)`` view of a flat coefficient vector."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.ndof,):
            raise InvalidArgument(f"expected {self.ndof} coefficients, got {coeffs.shape}")
        return coeffs.reshape(self.N, self.n_scalar)

    def local_coeffs(self, coeffs, elements=None):
        """``(ne, nb, N)`` element-local coefficients."""
        c = self.components(coeffs)
        dofs = self.element_dofs if elements is None else self.element_dofs[elements]
        return np.moveaxis(c[:, dofs], 0, -1)

    @cached_property
    def dof_coordinates(self):
        ref = self.basis.nodes
        phys = self.mesh.reference_map(np.arange(self.mesh.n_elements)[:, None], ref[None])
        out = np.empty((self.n_scalar, 2))
        out[self.element_dofs.ravel()] = phys.reshape(-1, 2)
        return out

    # -- point data -------------------------------------------------------

    def _basis_at(self, elements, ref):
        """Physical basis data ``(ne, nq, nb, 3)`` and Jacobian determinants."""
        val, grad = self.basis.eval(ref)
        jac = self.mesh.jacobian(elements[:, None], ref if ref.ndim == 3 else ref[None])
        det = np.linalg.det(jac)
        inv_t = np.linalg.inv(jac).swapaxes(-1, -2)
        if grad.ndim == 3:
            grad = np.broadcast_to(grad, jac.shape[:1] + grad.shape)
            val = np.broadcast_to(val, jac.shape[:1] + val.shape)
        phys = np.einsum("eqdk,eqak->eqad", inv_t, grad)
        data = np.empty(val.shape + (3,))
        data[..., 0] = val
        data[..., 1] = phys[..., 1]
        data[..., 2] = phys[..., 0]
        return data, det

    def volume_data(self, degree=None):
        degree = 2 * self.p + 2 if degree is None else degree
        return self._volume_data(int(degree))

    @cached_property
    def _volume_cache(self):
        return {}

    def _volume_data(self, degree):
        if degree not in self._volume_cache:
            rule = volume_rule(self.mesh.kind, degree)
            elems = np.arange(self.mesh.n_elements)
            data, det = self._basis_at(elems, rule.points)
            if np.any(det <= 0):
                bad = int(np.nonzero((det <= 0).any(axis=1))[0][0])
                raise NumericError("nonpositive Jacobian determinant", element_id=bad)
            pts = self.mesh.reference_map(elems[:, None], rule.points[None])
            self._volume_cache[degree] = PointData(elems, det * rule.weights[None], pts, data)
        return self._volume_cache[degree]

    def facet_data(self, tag, degree=None):
        """Basis data on boundary facets with tag ``tag``; weights are arc length."""
        degree = 2 * self.p + 2 if degree is None else degree
        key = ("facet", int(tag), int(degree))
        if key in self._volume_cache:
            return self._volume_cache[key]
        elems, local, _ = self.mesh.facets(tag)
        rule = line_rule(degree)
        rv = reference_vertices(self.mesh.kind)
        nv = len(rv)
        ra, rb = rv[local], rv[(local + 1) % nv]
        s = 0.5 * (rule.points + 1.0)
        ref = ra[:, None] + s[None, :, None] * (rb - ra)[:, None]
        data, _ = self._basis_at(elems, ref)
        xa = self.mesh.nodes[self.mesh.cells[elems, local]]
        xb = self.mesh.nodes[self.mesh.cells[elems, (local + 1) % nv]]
        length = np.linalg.norm(xb - xa, axis=-1)
        w = 0.5 * length[:, None] * rule.weights[None]
        pts = xa[:, None] + s[None, :, None] * (xb - xa)[:, None]
        tang = (xb - xa) / length[:, None]
        normals = np.column_stack([tang[:, 1], -tang[:, 0]])  # outward for CCW
        out = PointData(elems, w, pts, data, normals)
        self._volume_cache[key] = out
        return out

    def point_data(self, elements, ref):
        """Basis data for one reference point per element: ``(n, 1, nb, 3)``."""
        elements = np.asarray(elements, dtype=np.int64)
        ref = np.asarray(ref, dtype=float).reshape(len(elements), 1, 2)
        data, _ = self._basis_at(elements, ref)
        pts = self.mesh.reference_map(elements[:, None], ref)
        return PointData(elements, np.ones((len(elements), 1)), pts, data)

    def eval_at(self, coeffs, pdata):
        """Field values and gradients ``(ne, nq, 3, N)`` at the points of ``pdata``."""
        return eval_fields(pdata.basis, self.local_coeffs(coeffs, pdata.elements))


def build_space(mesh, p, N=1):
    return FeSpace(mesh, p, N)


def _call_vector(g, x, t, N):
    val = np.asarray(g(x, t), dtype=float)
    if N == 1 and val.shape == x.shape:
        val = val[..., None]
    return np.broadcast_to(val, x.shape + (N,))


def interpolate(space, g):
    """Nodal interpolant of ``g(x, t) -> (..., N)`` (vectorized callable)."""
    xy = space.dof_coordinates
    val = _call_vector(g, xy[:, 0], xy[:, 1], space.N)
    if not np.all(np.isfinite(val)):
        raise NumericError("non-finite nodal value in interpolation")
    return np.ascontiguousarray(val.T).ravel()


def evaluate_field(space, coeffs, element_id, ref):
    """Value (N,) and physical gradient (N, 2) with columns (d/dt, d/dx)."""
    pd = space.point_data([element_id], [ref])
    f = space.eval_at(coeffs, pd)[0, 0]
    return f[0].copy(), f[1:].T.copy()


def evaluate_points(space, coeffs, pts):
    """Field values ``(n, N)`` at physical points ``(n, 2)``."""
    elems, ref = space.mesh.locate_points(pts)
    pd = space.point_data(elems, ref)
    return space.eval_at(coeffs, pd)[:, 0, 0, :]


def trace_quadrature(space, tag, degree=None):
    """Yield ``(element_id, reference points, weights, x)`` on a time facet."""
    tag = Tag(tag)
    if tag not in (Tag.INITIAL, Tag.FINAL):
        raise Unsupported("trace quadrature is defined on time facets only")
    elems, local, _ = space.mesh.facets(tag)
    degree = 2 * space.p + 2 if degree is None else degree
    rule = line_rule(degree)
    rv = reference_vertices(space.mesh.kind)
    nv = len(rv)
    s = 0.5 * (rule.points + 1.0)
    for e, k in zip(elems.tolist(), local.tolist()):
        ref = rv[k] + s[:, None] * (rv[(k + 1) % nv] - rv[k])
        xa = space.mesh.nodes[space.mesh.cells[e, k]]
        xb = space.mesh.nodes[space.mesh.cells[e, (k + 1) % nv]]
        x = xa[0] + s * (xb[0] - xa[0])
        w = 0.5 * abs(xb[0] - xa[0]) * rule.weights
        yield e, ref, w, x


def l2_error(space, coeffs, transform, exact, degree=None):
    """L2(Q_T) norm of ``transform(w_h) - exact`` over the whole cylinder."""
    vd = space.volume_data(degree)
    vals = space.eval_at(coeffs, vd)[:, :, 0, :]
    mapped = np.asarray(transform(vals), dtype=float).reshape(vals.shape)
    ex = _call_vector(exact, vd.points[..., 0], vd.points[..., 1], space.N)
    return float(np.sqrt((vd.weights[..., None] * (mapped - ex) ** 2).sum()))


def slice_data(space, t0, x_range=None, degree=None):
    """Point data on the line ``t = t0`` (segments clipped per element)."""
    mesh = space.mesh
    if not (mesh.t_start - 1e-12 <= t0 <= mesh.t_end + 1e-12):
        raise InvalidArgument("slice time outside the cylinder")
    t0 = min(max(t0, mesh.t_start), mesh.t_end)
    xa, xb = (mesh.x_left, mesh.x_right) if x_range is None else x_range
    xy = mesh.nodes[mesh.cells]
    tmin, tmax = xy[..., 1].min(1), xy[..., 1].max(1)
    if t0 >= mesh.t_end:
        cand = np.nonzero((tmin < t0) & (tmax >= t0))[0]
    else:
        cand = np.nonzero((tmin <= t0) & (tmax > t0))[0]
    a = xy[cand]
    b = np.roll(a, -1, axis=1)
    dt = b[..., 1] - a[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(dt != 0, (t0 - a[..., 1]) / dt, np.nan)
    hit = (s >= 0) & (s <= 1)
    xs = np.where(hit, a[..., 0] + s * (b[..., 0] - a[..., 0]), np.nan)
    flat = np.abs(dt) == 0
    on = flat & (a[..., 1] == t0)
    xs_lo = np.fmin(np.nanmin(np.where(hit, xs, np.inf), axis=1),
                    np.min(np.where(on, np.minimum(a[..., 0], b[..., 0]), np.inf), axis=1))
    xs_hi = np.fmax(np.nanmax(np.where(hit, xs, -np.inf), axis=1),
                    np.max(np.where(on, np.maximum(a[..., 0], b[..., 0]), -np.inf), axis=1))
    lo = np.maximum(xs_lo, xa)
    hi = np.minimum(xs_hi, xb)
    keep = hi - lo > 1e-14 * mesh.width
    cand, lo, hi = cand[keep], lo[keep], hi[keep]
    degree = 2 * space.p + 2 if degree is None else degree
    rule = line_rule(degree)
    s = 0.5 * (rule.points + 1.0)
    x = lo[:, None] + s[None] * (hi - lo)[:, None]
    pts = np.stack([x, np.full_like(x, t0)], axis=-1)
    ref = mesh.inverse_map(np.repeat(cand[:, None], len(s), axis=1), pts)
    data, _ = space._basis_at(cand, ref)
    w = 0.5 * (hi - lo)[:, None] * rule.weights[None]
    return PointData(cand, w, pts, data)


def time_slice_integral(space, coeffs, t0, integrand, x_range=None, vector=False):
    """Integral over x of ``integrand(w_h(x, t0))``.

    ``integrand`` maps values ``(..., N)`` to scalars ``(...)``; with
    ``vector=True`` it returns ``(..., N)`` and an ``(N,)`` array is returned.
    """
    sd = slice_data(space, t0, x_range)
    vals = space.eval_at(coeffs, sd)[:, :, 0, :]
    f = np.asarray(integrand(vals), dtype=float)
    if vector:
        return (sd.weights[..., None] * np.broadcast_to(f, vals.shape)).sum(axis=(0, 1))
    return float((sd.weights * np.broadcast_to(f, vals.shape[:2])).sum())
