import numpy as np
import pytest

from stxdiff.errors import InvalidArgument, Unsupported
from stxdiff.mesh import (
    Pattern, Tag, adaptive_refine, bisect, build_cartesian, build_simplicial, dorfler_mark,
    uniform_refine,
)


@pytest.mark.parametrize("builder", [
    lambda: build_cartesian(0, 1, 1, 4, 3),
    lambda: build_simplicial(0, 1, 1, 4, 3),
    lambda: build_simplicial(0, 1, 1, 4, 3, pattern=Pattern.CRISS_CROSS),
])
def test_structured_meshes_are_conforming_and_cover_the_box(builder):
    m = builder()
    m.check_conformity()
    ref = np.full((m.n_elements, 1, 2), 0.25)
    det = np.linalg.det(m.jacobian(np.arange(m.n_elements)[:, None], ref))
    area = det.sum() * (4.0 if m.n_vertices_per_cell == 4 else 0.5)
    assert area == pytest.approx(1.0)
    assert m.facet_measure(Tag.INITIAL) == pytest.approx(1.0)
    assert m.facet_measure(Tag.LEFT) == pytest.approx(1.0)


def test_element_counts():
    assert build_cartesian(0, 1, 1, 4, 3).n_elements == 12
    assert build_simplicial(0, 1, 1, 4, 3).n_elements == 24
    assert build_simplicial(0, 1, 1, 4, 3, pattern=Pattern.CRISS_CROSS).n_elements == 48


def test_time_offset_mesh():
    m = build_cartesian(0, 2, 5, 2, 3, t0=2)
    assert m.t_start == 2 and m.t_end == 5
    assert m.nodes[:, 1].min() == 2 and m.nodes[:, 1].max() == 5


@pytest.mark.parametrize("args", [(1, 0, 1, 2, 2), (0, 1, 0, 2, 2), (0, 1, 1, 0, 2), (0, 1, 1, 2.5, 2)])
def test_invalid_boxes_rejected(args):
    with pytest.raises(InvalidArgument):
        build_cartesian(*args)


def test_locate_and_inverse_map_roundtrip():
    m = build_simplicial(0, 1, 1, 3, 3, pattern=Pattern.CRISS_CROSS)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, size=(50, 2))
    elem, ref = m.locate_points(pts)
    assert np.all(elem >= 0)
    assert np.allclose(m.reference_map(elem, ref), pts)


def test_uniform_refine_halves_h():
    for m in (build_cartesian(0, 1, 1, 2, 2), build_simplicial(0, 1, 1, 2, 2)):
        r = uniform_refine(m)
        r.check_conformity()
        assert r.n_elements == 4 * m.n_elements
        assert r.h == pytest.approx(m.h / 2)


def test_dorfler_marks_minimal_set():
    eta = np.array([3.0, 1.0, 2.0, 0.5])
    marked = dorfler_mark(eta, 0.5)
    total = (eta ** 2).sum()
    assert (eta[marked] ** 2).sum() >= 0.25 * total
    assert list(marked) == [0]
    assert list(dorfler_mark(eta, 1.0)) == [0, 1, 2, 3]
    with pytest.raises(InvalidArgument):
        dorfler_mark(eta, 0.0)
    with pytest.raises(InvalidArgument):
        dorfler_mark(-eta, 0.5)


def test_bisection_keeps_conformity():
    m = build_simplicial(0, 1, 1, 2, 2)
    rng = np.random.default_rng(1)
    for _ in range(6):
        m = bisect(m, rng.choice(m.n_elements, size=2, replace=False))
        m.check_conformity()
    total = np.abs(np.linalg.det(m.jacobian(np.arange(m.n_elements)[:, None],
                                            np.full((m.n_elements, 1, 2), 0.2)))).sum() * 0.5
    assert total == pytest.approx(1.0)


def test_adaptive_refine_needs_triangles():
    m = build_cartesian(0, 1, 1, 2, 2)
    with pytest.raises(Unsupported):
        adaptive_refine(m, np.ones(m.n_elements), 0.5)


def test_slab_levels_validated():
    m = build_cartesian(0, 1, 1, 2, 4)
    assert m.with_slabs([0, 0.5, 1]).slab_levels == (0.0, 0.5, 1.0)
    with pytest.raises(InvalidArgument):
        m.with_slabs([0, 0.7, 0.5, 1])
