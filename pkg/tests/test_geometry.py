import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twoscale.geometry import (
    GeometryError,
    arc,
    boundary_distance,
    circle,
    curve_separation,
    distance_to_set,
    line,
    polygon,
    segment,
)

UNIT = ((0.0, 1.0), (0.0, 1.0))


def test_circle_distance_and_region():
    c = circle((0.5, 0.5), 0.25)
    pts = np.array([[0.5, 0.5], [0.5, 0.75], [1.0, 0.5]])
    np.testing.assert_allclose(c.distance(pts), [0.25, 0.0, 0.25])
    np.testing.assert_array_equal(c.region(pts), [True, False, False])


def test_line_side_convention():
    # direction (1, 0): the "+" side is to the left, i.e. y above the point
    ln = line((0.0, 0.5), (1.0, 0.0))
    assert ln.region(np.array([0.3, 0.7]))
    assert not ln.region(np.array([0.3, 0.2]))
    assert ln.length(UNIT) == pytest.approx(1.0)
    diag = line((0.5, 0.5), (1.0, 1.0))
    assert diag.length(UNIT) == pytest.approx(math.sqrt(2))


def test_line_needs_a_box_for_its_length():
    with pytest.raises(GeometryError):
        line((0, 0), (1, 0)).length()


def test_polygon_validation():
    square = [(0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.2, 0.8)]
    assert polygon(square).length() == pytest.approx(2.4)
    with pytest.raises(GeometryError):
        polygon(square[::-1])  # clockwise
    with pytest.raises(GeometryError):
        polygon([(0.2, 0.2), (0.8, 0.8), (0.8, 0.2), (0.2, 0.8)])  # bow tie
    with pytest.raises(GeometryError):
        polygon(square, rho=0.0)


def test_polygon_region_even_odd():
    tri = polygon([(0.1, 0.1), (0.9, 0.1), (0.5, 0.9)])
    assert tri.region(np.array([0.5, 0.3]))
    assert not tri.region(np.array([0.1, 0.8]))


def test_open_curves_carry_no_jump():
    with pytest.raises(GeometryError):
        segment((0, 0), (1, 1)).with_rho(1.0)
    with pytest.raises(GeometryError):
        arc((0, 0), 1, 0, 1).region(np.zeros(2))


def test_arc_distance_uses_endpoints_outside_the_span():
    a = arc((0.0, 0.0), 1.0, 0.0, math.pi / 2)
    assert a.distance(np.array([2.0, 0.0])) == pytest.approx(1.0)
    assert a.distance(np.array([0.0, -1.0])) == pytest.approx(math.sqrt(2))  # nearest end (1, 0)


@pytest.mark.parametrize("curve, pieces", [
    (circle((0.5, 0.5), 0.2), 4),
    (arc((0, 0), 1, 0.1, 1.0), 1),
    (arc((0, 0), 1, 0.0, math.pi), 2),
    (segment((0, 0), (1, 1)), 1),
    (polygon([(0.1, 0.1), (0.9, 0.1), (0.5, 0.9)]), 3),
])
def test_monotone_pieces(curve, pieces):
    assert curve.monotone_pieces(UNIT) == pieces


curves = st.one_of(
    st.builds(lambda x, y, r: circle((x, y), r), st.floats(0.3, 0.7), st.floats(0.3, 0.7), st.floats(0.05, 0.25)),
    st.builds(lambda a, b, c, d: segment((a, b), (c, d)), st.floats(0, 0.4), st.floats(0, 1), st.floats(0.5, 1),
              st.floats(0, 1)),
    st.builds(lambda s, sp: arc((0.5, 0.5), 0.3, s, sp), st.floats(0, 6.2), st.floats(0.1, 6.2)),
    st.builds(lambda th: line((0.5, 0.5), (math.cos(th), math.sin(th))), st.floats(0, math.pi)),
)


@given(curves, st.sampled_from([1 / 8, 1 / 32, 1 / 100]), st.floats(-0.5, 0.5))
def test_cell_lengths_partition_the_curve(c, width, shift):
    lengths = c.cell_lengths(width, (shift * width, 0.0), UNIT)
    assert sum(lengths.values()) == pytest.approx(c.length(UNIT), rel=1e-9, abs=1e-12)
    if c.kind in ("segment", "line"):
        # a straight piece inside one cell is no longer than its diagonal
        assert max(lengths.values()) <= width * math.sqrt(2) * (1 + 1e-9)


@given(curves)
def test_sample_points_lie_on_the_curve(c):
    pts = c.sample_points(0.01, UNIT)
    assert len(pts) >= 2
    np.testing.assert_allclose(c.distance(pts), 0, atol=1e-12)


def test_distance_to_set_is_the_minimum():
    a, b = circle((0.3, 0.5), 0.1), circle((0.7, 0.5), 0.1)
    p = np.array([[0.5, 0.5], [0.1, 0.5]])
    np.testing.assert_allclose(distance_to_set([a, b], p), [0.1, 0.1])
    assert curve_separation(a, b) == pytest.approx(0.2, abs=1e-3)
    assert boundary_distance(a, UNIT) == pytest.approx(0.2, abs=1e-3)
