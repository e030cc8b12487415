import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from evacsim.geometry import GeometryError, Point, dist, make_shape, toward

SHAPES = ("triangle", "square")


def test_triangle_constants():
    T = make_shape("triangle")
    h, x, y = T.constants["h"], T.constants["x_c"], T.constants["y_c"]
    assert h == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    assert dist(T.centroid, T.vertex("A")) == pytest.approx(x, abs=1e-15)
    assert dist(T.centroid, Point(0.5, 0.0)) == pytest.approx(y, abs=1e-15)
    assert x == pytest.approx(2 * y, abs=1e-15)


def test_square_constants():
    S = make_shape("square")
    for lab in "ABCD":
        assert dist(S.centroid, S.vertex(lab)) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
    assert S.max_centroid_dist == pytest.approx(S.constants["half_diag"])


@pytest.mark.parametrize("kind", SHAPES)
def test_vertices_have_integer_arcs(kind):
    S = make_shape(kind)
    for i, lab in enumerate(S.labels):
        assert S.vertex_arc(lab) == i
        assert S.boundary_point(i) == pytest.approx(S.vertex(lab))
        assert len(S.side_of(S.vertex(lab))) == 2


@pytest.mark.parametrize("kind", SHAPES)
@given(s=st.floats(min_value=0.0, max_value=4.0, allow_nan=False, exclude_max=True))
def test_arc_roundtrip(kind, s):
    S = make_shape(kind)
    s = s % S.perimeter
    back = S.arc_of(S.boundary_point(s))
    assert min(abs(back - s), S.perimeter - abs(back - s)) < 1e-12


@pytest.mark.parametrize("kind", SHAPES)
@given(s=st.floats(min_value=0.0, max_value=4.0, allow_nan=False, exclude_max=True))
def test_mirror_arc_matches_mirror_point(kind, s):
    S = make_shape(kind)
    m = S.boundary_point(S.mirror_arc(s))
    assert m == pytest.approx(S.mirror(S.boundary_point(s)), abs=1e-12)


@pytest.mark.parametrize("kind", SHAPES)
def test_vectorized_boundary_points(kind):
    S = make_shape(kind)
    s = np.linspace(-1.0, 2 * S.perimeter, 301)
    pts = S.boundary_points(s)
    for si, p in zip(s, pts):
        assert tuple(p) == pytest.approx(S.boundary_point(si), abs=1e-14)


def test_arc_dist_is_counterclockwise():
    S = make_shape("square")
    assert S.arc_dist(3.5, 0.5) == pytest.approx(1.0)
    assert S.arc_dist(0.5, 3.5) == pytest.approx(3.0)


def test_interior_point_is_not_on_boundary():
    S = make_shape("triangle")
    assert not S.on_boundary(S.centroid)
    with pytest.raises(GeometryError):
        S.arc_of(S.centroid)


def test_unknown_shape():
    with pytest.raises(GeometryError):
        make_shape("hexagon")


def test_toward_rejects_coincident_points():
    with pytest.raises(GeometryError):
        toward(Point(0, 0), Point(0, 0), 1.0)
    assert toward(Point(0, 0), Point(2, 0), 0.5) == pytest.approx((0.5, 0.0))
