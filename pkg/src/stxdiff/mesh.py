"""Conforming meshes of the space-time cylinder (t0, T) x (x_L, x_R).

Nodes are stored as ``(x, t)`` pairs.  Elements are either all triangles or all
quadrilaterals, with vertices listed counterclockwise in the (x, t) plane.
Local edge ``k`` joins local vertices ``k`` and ``k+1`` (cyclically).

For triangles the vertex order also encodes the newest-vertex-bisection
state: vertex 0 is the newest vertex and edge ``(v1, v2)`` is the refinement
edge.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgument, OutOfDomain, Unsupported


class Tag(enum.IntEnum):
    INITIAL = 0
    FINAL = 1
    LEFT = 2
    RIGHT = 3


class Pattern(enum.Enum):
    CRISS_CROSS = "crisscross"
    DIAGONAL_NE = "diagonal"


TRIANGLE = "triangle"
QUAD = "quad"

_GEOM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpaceTimeMesh:
    nodes: np.ndarray
    cells: np.ndarray
    kind: str
    x_left: float
    x_right: float
    t_start: float
    t_end: float
    slab_levels: tuple = field(default=())

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.cells.setflags(write=False)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.cells.shape[0]

    @property
    def n_vertices_per_cell(self):
        return self.cells.shape[1]

    @property
    def width(self):
        return self.x_right - self.x_left

    @property
    def duration(self):
        return self.t_end - self.t_start

    @cached_property
    def diameters(self):
        xy = self.nodes[self.cells]
        d = xy[:, :, None, :] - xy[:, None, :, :]
        return np.sqrt((d ** 2).sum(-1)).max(axis=(1, 2))

    @property
    def h(self):
        return float(self.diameters.max())

    @cached_property
    def _edge_data(self):
        nv = self.n_vertices_per_cell
        loc = np.stack([self.cells, np.roll(self.cells, -1, axis=1)], axis=-1)
        key = np.sort(loc.reshape(-1, 2), axis=1)
        edges, inv = np.unique(key, axis=0, return_inverse=True)
        return edges, inv.reshape(-1, nv)

    @property
    def edges(self):
        """Unique edges as sorted vertex pairs, ordered lexicographically."""
        return self._edge_data[0]

    @property
    def cell_edges(self):
        """``(ne, nv)`` global edge id of each local edge."""
        return self._edge_data[1]

    @cached_property
    def edge_elements(self):
        """``(n_edges, 2)`` incident elements; ``-1`` marks a boundary side."""
        ce = self.cell_edges
        out = -np.ones((self.edges.shape[0], 2), dtype=np.int64)
        flat = ce.ravel()
        elem = np.repeat(np.arange(self.n_elements), ce.shape[1])
        order = np.argsort(flat, kind="stable")
        flat, elem = flat[order], elem[order]
        first = np.ones(flat.shape, bool)
        first[1:] = flat[1:] != flat[:-1]
        out[flat[first], 0] = elem[first]
        out[flat[~first], 1] = elem[~first]
        return out

    @cached_property
    def _facets(self):
        ee = self.edge_elements
        bnd = np.nonzero(ee[:, 1] < 0)[0]
        elem = ee[bnd, 0]
        local = np.argmax(self.cell_edges[elem] == bnd[:, None], axis=1)
        mid = self.nodes[self.edges[bnd]].mean(axis=1)
        scale = max(self.width, self.duration)
        tol = _GEOM_TOL * scale
        tags = np.full(bnd.shape, -1, dtype=np.int64)
        tags[np.abs(mid[:, 0] - self.x_left) < tol] = Tag.LEFT
        tags[np.abs(mid[:, 0] - self.x_right) < tol] = Tag.RIGHT
        tags[np.abs(mid[:, 1] - self.t_start) < tol] = Tag.INITIAL
        tags[np.abs(mid[:, 1] - self.t_end) < tol] = Tag.FINAL
        if np.any(tags < 0):
            raise InvalidArgument("boundary edge not on the cylinder boundary")
        order = np.lexsort((local, elem))
        return elem[order], local[order], tags[order]

    def facets(self, tag=None):
        """Boundary facets as ``(element_ids, local_edges, tags)``."""
        elem, local, tags = self._facets
        if tag is None:
            return elem, local, tags
        sel = tags == int(tag)
        return elem[sel], local[sel], tags[sel]

    def facet_measure(self, tag):
        elem, local, _ = self.facets(tag)
        nv = self.n_vertices_per_cell
        a = self.nodes[self.cells[elem, local]]
        b = self.nodes[self.cells[elem, (local + 1) % nv]]
        return float(np.sqrt(((b - a) ** 2).sum(-1)).sum())

    # -- geometry ---------------------------------------------------------

    def reference_map(self, elem, ref):
        """Map reference points ``ref`` (..., 2) of elements ``elem`` to (x, t)."""
        elem = np.asarray(elem)
        ref = np.asarray(ref, dtype=float)
        verts = self.nodes[self.cells[elem]]
        shape = _vertex_shape(self.kind, ref)
        return np.einsum("...v,...vd->...d", shape, verts)

    def jacobian(self, elem, ref):
        """Jacobian ``d(x, t)/d(xi, eta)`` of the reference map, shape (..., 2, 2)."""
        verts = self.nodes[self.cells[np.asarray(elem)]]
        dshape = _vertex_shape_grad(self.kind, np.asarray(ref, dtype=float))
        return np.einsum("...vk,...vd->...dk", dshape, verts)

    def inverse_map(self, elem, pts, iters=30):
        """Reference preimages of physical points ``pts`` in elements ``elem``."""
        elem = np.asarray(elem)
        pts = np.asarray(pts, dtype=float)
        verts = self.nodes[self.cells[elem]]
        if self.kind == TRIANGLE:
            jac = np.stack([verts[..., 1, :] - verts[..., 0, :],
                            verts[..., 2, :] - verts[..., 0, :]], axis=-1)
            return np.linalg.solve(jac, (pts - verts[..., 0, :])[..., None])[..., 0]
        ref = np.zeros(pts.shape)
        for _ in range(iters):
            resid = self.reference_map(elem, ref) - pts
            jac = self.jacobian(elem, ref)
            step = np.linalg.solve(jac, resid[..., None])[..., 0]
            ref = ref - step
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return ref

    def contains_reference(self, ref, tol=1e-10):
        ref = np.asarray(ref)
        if self.kind == TRIANGLE:
            return (ref[..., 0] >= -tol) & (ref[..., 1] >= -tol) & (ref.sum(-1) <= 1 + tol)
        return np.all(np.abs(ref) <= 1 + tol, axis=-1)

    def locate_points(self, pts):
        """Locate many points; returns ``(element_ids, reference_coords)``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        scale = max(self.width, self.duration)
        tol = _GEOM_TOL * scale
        outside = ((pts[:, 0] < self.x_left - tol) | (pts[:, 0] > self.x_right + tol)
                   | (pts[:, 1] < self.t_start - tol) | (pts[:, 1] > self.t_end + tol))
        if np.any(outside):
            raise OutOfDomain(f"point {pts[np.argmax(outside)]} outside the space-time cylinder")
        xy = self.nodes[self.cells]
        lo, hi = xy.min(axis=1) - tol, xy.max(axis=1) + tol
        elem_out = np.full(len(pts), -1, dtype=np.int64)
        ref_out = np.zeros((len(pts), 2))
        for start in range(0, len(pts), 256):
            chunk = pts[start:start + 256]
            hit = np.all((chunk[:, None, :] >= lo[None]) & (chunk[:, None, :] <= hi[None]), axis=-1)
            pi, ei = np.nonzero(hit)
            ref = self.inverse_map(ei, chunk[pi])
            inside = self.contains_reference(ref)
            pi, ei, ref = pi[inside], ei[inside], ref[inside]
            first = np.ones(len(pi), bool)
            first[1:] = pi[1:] != pi[:-1]
            elem_out[start + pi[first]] = ei[first]
            ref_out[start + pi[first]] = ref[first]
        if np.any(elem_out < 0):
            raise OutOfDomain("point not covered by any element")
        return elem_out, ref_out

    def locate_point(self, x, t):
        elem, ref = self.locate_points([[x, t]])
        return int(elem[0]), ref[0]

    # -- audits and output ------------------------------------------------

    def check_conformity(self):
        """Raise ``InvalidArgument`` unless the mesh is conforming."""
        counts = np.bincount(self.cell_edges.ravel(), minlength=len(self.edges))
        if np.any(counts > 2):
            raise InvalidArgument("edge shared by more than two elements")
        nv = self.n_vertices_per_cell
        for e_id in np.nonzero(counts == 2)[0]:
            k0, k1 = self.edge_elements[e_id]
            d = []
            for k in (k0, k1):
                loc = int(np.argmax(self.cell_edges[k] == e_id))
                d.append((self.cells[k, loc], self.cells[k, (loc + 1) % nv]))
            if d[0] != (d[1][1], d[1][0]):
                raise InvalidArgument(f"interior edge {e_id} not oppositely oriented")
        self.facets()
        a = self.nodes[self.edges[:, 0]]
        b = self.nodes[self.edges[:, 1]]
        for start in range(0, len(self.edges), 512):
            aa, bb = a[start:start + 512, None], b[start:start + 512, None]
            p = self.nodes[None]
            seg = bb - aa
            s = ((p - aa) * seg).sum(-1) / (seg ** 2).sum(-1)
            dist = np.linalg.norm(p - (aa + s[..., None] * seg), axis=-1)
            hang = (s > 1e-9) & (s < 1 - 1e-9) & (dist < 1e-9 * max(self.width, self.duration))
            if np.any(hang):
                raise InvalidArgument("hanging node detected")
        det = np.linalg.det(self.jacobian(np.arange(self.n_elements)[:, None],
                                          _audit_points(self.kind)[None]))
        if np.any(det <= 0):
            raise InvalidArgument("element with nonpositive Jacobian")

    def dump(self):
        """Debug text dump: ``(node_text, element_text)``."""
        node_lines = [f"{i},{x!r},{t!r}" for i, (x, t) in enumerate(self.nodes.tolist())]
        elem_lines = [f"{i},{self.kind}," + ",".join(str(v) for v in c)
                      for i, c in enumerate(self.cells.tolist())]
        return "\n".join(node_lines) + "\n", "\n".join(elem_lines) + "\n"

    def with_slabs(self, levels):
        levels = tuple(float(v) for v in levels)
        if len(levels) < 2 or np.any(np.diff(levels) <= 0):
            raise InvalidArgument("slab levels must be strictly increasing")
        if not (np.isclose(levels[0], self.t_start) and np.isclose(levels[-1], self.t_end)):
            raise InvalidArgument("slab levels must span the time interval")
        return SpaceTimeMesh(self.nodes.copy(), self.cells.copy(), self.kind, self.x_left,
                             self.x_right, self.t_start, self.t_end, levels)


def _vertex_shape(kind, ref):
    xi, eta = ref[..., 0], ref[..., 1]
    if kind == TRIANGLE:
        return np.stack([1 - xi - eta, xi, eta], axis=-1)
    return 0.25 * np.stack([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
                            (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)], axis=-1)


def _vertex_shape_grad(kind, ref):
    xi, eta = ref[..., 0], ref[..., 1]
    if kind == TRIANGLE:
        g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return np.broadcast_to(g, ref.shape[:-1] + (3, 2))
    return 0.25 * np.stack([
        np.stack([-(1 - eta), -(1 - xi)], -1),
        np.stack([(1 - eta), -(1 + xi)], -1),
        np.stack([(1 + eta), (1 + xi)], -1),
        np.stack([-(1 + eta), (1 - xi)], -1),
    ], axis=-2)


def _audit_points(kind):
    if kind == TRIANGLE:
        return np.array([[1 / 3, 1 / 3], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [0.0, 0.0]])


def _validate_box(x_left, x_right, T, nx, nt, t0):
    if not (x_right > x_left) or not (T > t0):
        raise InvalidArgument("nonpositive extent")
    if int(nx) != nx or int(nt) != nt or nx < 1 or nt < 1:
        raise InvalidArgument("cell counts must be positive integers")


def _grid_nodes(x_left, x_right, T, nx, nt, t0):
    xs = np.linspace(x_left, x_right, nx + 1)
    ts = np.linspace(t0, T, nt + 1)
    X, Tt = np.meshgrid(xs, ts)
    return np.column_stack([X.ravel(), Tt.ravel()])


def _grid_quads(nx, nt):
    j, i = np.meshgrid(np.arange(nt), np.arange(nx), indexing="ij")
    v0 = (j * (nx + 1) + i).ravel()
    return np.column_stack([v0, v0 + 1, v0 + nx + 2, v0 + nx + 1])


def build_cartesian(x_left, x_right, T, nx, nt, t0=0.0):
    """Axis-aligned quadrilateral mesh of ``(t0, T) x (x_left, x_right)``."""
    _validate_box(x_left, x_right, T, nx, nt, t0)
    nx, nt = int(nx), int(nt)
    return SpaceTimeMesh(_grid_nodes(x_left, x_right, T, nx, nt, t0), _grid_quads(nx, nt),
                         QUAD, float(x_left), float(x_right), float(t0), float(T))


def build_simplicial(x_left, x_right, T, nx, nt, pattern=Pattern.DIAGONAL_NE, t0=0.0):
    """Structured triangulation: each grid cell split in 2 or 4 triangles."""
    _validate_box(x_left, x_right, T, nx, nt, t0)
    pattern = Pattern(pattern)
    nx, nt = int(nx), int(nt)
    nodes = _grid_nodes(x_left, x_right, T, nx, nt, t0)
    q = _grid_quads(nx, nt)
    if pattern is Pattern.DIAGONAL_NE:
        tris = np.concatenate([q[:, [0, 1, 2]], q[:, [0, 2, 3]]])
    else:
        centers = nodes[q].mean(axis=1)
        c = nodes.shape[0] + np.arange(q.shape[0])
        nodes = np.vstack([nodes, centers])
        tris = np.concatenate([np.column_stack([q[:, k], q[:, (k + 1) % 4], c]) for k in range(4)])
    tris = _longest_edge_first(nodes, tris)
    return SpaceTimeMesh(nodes, tris, TRIANGLE, float(x_left), float(x_right), float(t0), float(T))


def _longest_edge_first(nodes, tris):
    """Rotate each triangle so the edge opposite vertex 0 is its longest."""
    p = nodes[tris]
    opp = np.stack([np.linalg.norm(p[:, (k + 2) % 3] - p[:, (k + 1) % 3], axis=-1)
                    for k in range(3)], axis=1)
    start = np.argmax(opp, axis=1)
    idx = (start[:, None] + np.arange(3)[None]) % 3
    return np.take_along_axis(tris, idx, axis=1)


def uniform_refine(mesh):
    """Red refinement: every element into four similar children."""
    edges = mesh.edges
    ce = mesh.cell_edges
    nn = mesh.n_nodes
    mids = mesh.nodes[edges].mean(axis=1)
    m = nn + ce
    c = mesh.cells
    if mesh.kind == QUAD:
        centers = mesh.nodes[c].mean(axis=1)
        cid = nn + len(edges) + np.arange(mesh.n_elements)
        nodes = np.vstack([mesh.nodes, mids, centers])
        kids = [
            np.column_stack([c[:, 0], m[:, 0], cid, m[:, 3]]),
            np.column_stack([m[:, 0], c[:, 1], m[:, 1], cid]),
            np.column_stack([cid, m[:, 1], c[:, 2], m[:, 2]]),
            np.column_stack([m[:, 3], cid, m[:, 2], c[:, 3]]),
        ]
    else:
        nodes = np.vstack([mesh.nodes, mids])
        kids = [
            np.column_stack([c[:, 0], m[:, 0], m[:, 2]]),
            np.column_stack([m[:, 0], c[:, 1], m[:, 1]]),
            np.column_stack([m[:, 2], m[:, 1], c[:, 2]]),
            np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
        ]
    cells = np.stack(kids, axis=1).reshape(-1, mesh.n_vertices_per_cell)
    if mesh.kind == TRIANGLE:
        cells = _longest_edge_first(nodes, cells)
    return SpaceTimeMesh(nodes, cells, mesh.kind, mesh.x_left, mesh.x_right, mesh.t_start,
                         mesh.t_end, mesh.slab_levels)


def dorfler_mark(indicators, theta):
    """Minimal set of elements carrying a ``theta**2`` share of the squared sum."""
    eta = np.asarray(indicators, dtype=float)
    if not 0 < theta <= 1:
        raise InvalidArgument("theta must lie in (0, 1]")
    if np.any(eta < 0) or not np.all(np.isfinite(eta)):
        raise InvalidArgument("indicators must be finite and nonnegative")
    order = np.argsort(-eta, kind="stable")
    sq = eta[order] ** 2
    total = sq.sum()
    if total == 0:
        return order.copy()
    cum = np.cumsum(sq)
    k = int(np.searchsorted(cum, theta ** 2 * total * (1 - 1e-14))) + 1
    return np.sort(order[:min(k, len(order))])


def adaptive_refine(mesh, element_errors, theta):
    """Dörfler marking followed by newest-vertex bisection with closure."""
    if mesh.kind != TRIANGLE:
        raise Unsupported("adaptive refinement requires a simplicial mesh")
    errs = np.asarray(element_errors, dtype=float)
    if errs.shape != (mesh.n_elements,):
        raise InvalidArgument("one indicator per element required")
    marked = dorfler_mark(errs, theta)
    return bisect(mesh, marked)


def bisect(mesh, marked):
    """Newest-vertex bisection of ``marked`` triangles plus conforming closure."""
    ce = mesh.cell_edges
    ref_edge = ce[:, 1]
    edge_marked = np.zeros(len(mesh.edges), bool)
    edge_marked[ref_edge[np.asarray(marked, dtype=np.int64)]] = True
    while True:
        touched = edge_marked[ce].any(axis=1)
        need = touched & ~edge_marked[ref_edge]
        if not need.any():
            break
        edge_marked[ref_edge[need]] = True

    edge_ids = np.nonzero(edge_marked)[0]
    new_id = -np.ones(len(mesh.edges), dtype=np.int64)
    new_id[edge_ids] = mesh.n_nodes + np.arange(len(edge_ids))
    nodes = np.vstack([mesh.nodes, mesh.nodes[mesh.edges[edge_ids]].mean(axis=1)])
    edge_lookup = {tuple(e): i for i, e in enumerate(mesh.edges.tolist())}

    def mid(a, b):
        return new_id[edge_lookup[(a, b) if a < b else (b, a)]]

    out = []
    for tri in mesh.cells.tolist():
        v0, v1, v2 = tri
        m = mid(v1, v2)
        if m < 0:
            out.append(tri)
            continue
        for child in ((m, v0, v1), (m, v2, v0)):
            c0, c1, c2 = child
            mm = mid(c1, c2)
            if mm < 0:
                out.append(list(child))
            else:
                out.append([mm, c0, c1])
                out.append([mm, c2, c0])
    return SpaceTimeMesh(nodes, np.asarray(out, dtype=np.int64), TRIANGLE, mesh.x_left,
                         mesh.x_right, mesh.t_start, mesh.t_end, mesh.slab_levels)
