import math

import numpy as np
import pytest

from stxdiff.basis import lagrange_basis, line_rule, volume_rule
from stxdiff.errors import Unsupported
from stxdiff.fespace import (
    FeSpace, evaluate_points, interpolate, l2_error, time_slice_integral, trace_quadrature,
)
from stxdiff.mesh import QUAD, TRIANGLE, Pattern, Tag, build_cartesian, build_simplicial


def poly(p):
    return lambda x, t: (1 + x + 2 * t) ** p + x * t ** (p - 1)


@pytest.mark.parametrize("deg", range(1, 9))
def test_line_rule_exactness(deg):
    r = line_rule(deg)
    assert (r.weights * r.points ** deg).sum() == pytest.approx((1 - (-1) ** (deg + 1)) / (deg + 1))


@pytest.mark.parametrize("deg", [1, 3, 6])
def test_triangle_rule_exactness(deg):
    r = volume_rule(TRIANGLE, deg)
    # int over the unit triangle of x^a y^b = a! b! / (a + b + 2)!
    a, b = deg // 2, deg - deg // 2
    exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
    assert (r.weights * r.points[:, 0] ** a * r.points[:, 1] ** b).sum() == pytest.approx(exact)
    assert np.all(r.weights > 0)


@pytest.mark.parametrize("kind", [TRIANGLE, QUAD])
@pytest.mark.parametrize("p", [1, 2, 4])
def test_basis_is_nodal_and_partition_of_unity(kind, p):
    b = lagrange_basis(kind, p)
    vals, grads = b.eval(b.nodes)
    assert np.allclose(vals, np.eye(b.size), atol=1e-12)
    pts = np.array([[0.1, 0.2], [0.3, 0.3]]) if kind == TRIANGLE else np.array([[0.1, -0.4], [0.9, 0.3]])
    v, g = b.eval(pts)
    assert np.allclose(v.sum(-1), 1.0)
    assert np.allclose(g.sum(-2), 0.0, atol=1e-10)


def test_order_limit():
    with pytest.raises(Unsupported):
        lagrange_basis(QUAD, 7)


@pytest.mark.parametrize("mesh", [build_cartesian(0, 1, 1, 2, 3),
                                  build_simplicial(0, 1, 1, 2, 3, pattern=Pattern.CRISS_CROSS)])
@pytest.mark.parametrize("p", [1, 2, 3])
def test_interpolation_reproduces_polynomials(mesh, p):
    space = FeSpace(mesh, p, 1)
    g = poly(p if mesh.kind == TRIANGLE else 1)
    c = interpolate(space, g)
    exact = lambda x, t: np.asarray(g(x, t))[..., None]  # noqa: E731
    assert l2_error(space, c, lambda w: w, exact) < 1e-12
    pts = np.random.default_rng(0).uniform(0, 1, size=(20, 2))
    assert np.allclose(evaluate_points(space, c, pts)[:, 0], g(pts[:, 0], pts[:, 1]))


def test_component_major_layout():
    space = FeSpace(build_cartesian(0, 1, 1, 2, 2), 2, 2)
    c = interpolate(space, lambda x, t: np.stack([x, 1 + t], axis=-1))
    comps = space.components(c)
    assert comps.shape == (2, space.n_scalar)
    assert np.allclose(comps[0], space.dof_coordinates[:, 0])


def test_time_slice_integral_and_traces():
    mesh = build_simplicial(0, 2, 1, 3, 3)
    space = FeSpace(mesh, 2, 1)
    c = interpolate(space, lambda x, t: x * x + t)
    val = time_slice_integral(space, c, 0.4, lambda w: w[..., 0])
    assert val == pytest.approx(8 / 3 + 0.8)
    part = time_slice_integral(space, c, 0.4, lambda w: w[..., 0], x_range=(0.5, 1.5))
    assert part == pytest.approx((1.5 ** 3 - 0.5 ** 3) / 3 + 0.4)
    total = sum(w.sum() for _, _, w, _ in trace_quadrature(space, Tag.FINAL))
    assert total == pytest.approx(2.0)
    fd = space.facet_data(Tag.FINAL)
    assert np.allclose(fd.normals[..., 1], 1.0)
