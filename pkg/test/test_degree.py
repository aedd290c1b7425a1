"""Unit tests for boundary curves, winding degrees and inward offsets."""

import math

import numpy as np
import pytest

from coriolis_branches import degree
from coriolis_branches.degree import (
    Arc,
    BoundaryCurve,
    DegreeError,
    OffsetDegeneracyError,
    PlanarField,
    Segment,
    ZeroOnContourError,
)


UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def _complex_field(fn) -> PlanarField:
    """Wrap a complex function z ↦ fn(z) as a plane field."""

    def evaluate(points):
        z = fn(points[:, 0] + 1j * points[:, 1])
        return np.column_stack([z.real, z.imag])

    return PlanarField(evaluate)


@pytest.mark.unit
class TestCurves:
    """Tests for segments, arcs and closed chains."""

    def test_segment_points(self):
        """Linear interpolation between the endpoints."""
        s = Segment((0.0, 0.0), (2.0, 0.0))
        np.testing.assert_allclose(s.points(np.array([0.0, 0.5, 1.0])), [[0, 0], [1, 0], [2, 0]])
        np.testing.assert_allclose(s.direction, [1.0, 0.0])

    def test_arc_endpoints(self):
        """Quarter arc of the unit circle."""
        a = Arc((0.0, 0.0), 1.0, 0.0, math.pi / 2)
        np.testing.assert_allclose(a.start_point, [1.0, 0.0])
        np.testing.assert_allclose(a.end_point, [0.0, 1.0], atol=1e-15)
        assert a.turning() == pytest.approx(math.pi / 2)

    def test_open_chain_rejected(self):
        """Pieces must join end to start."""
        with pytest.raises(DegreeError, match="not closed"):
            BoundaryCurve((Segment((0.0, 0.0), (1.0, 0.0)), Segment((1.0, 0.0), (1.0, 1.0))))

    def test_turning_of_positive_curves(self):
        """Positively oriented simple curves turn by 2π."""
        assert BoundaryCurve.circle((0.0, 0.0), 1.0).total_turning() == pytest.approx(2 * math.pi)
        assert BoundaryCurve.polygon(UNIT_SQUARE).total_turning() == pytest.approx(2 * math.pi)

    def test_reversed_curve(self):
        """Reversal flips the turning and the signed area."""
        square = BoundaryCurve.polygon(UNIT_SQUARE)
        assert square.reversed().total_turning() == pytest.approx(-2 * math.pi)
        assert square.signed_area() == pytest.approx(1.0)
        assert square.reversed().signed_area() == pytest.approx(-1.0)

    def test_self_crossing_rejected(self):
        """A bow tie is not a simple curve."""
        bow_tie = BoundaryCurve.polygon([(0.0, 0.0), (2.0, 1.0), (2.0, 0.0), (0.0, 1.3)])
        with pytest.raises(DegreeError, match="not simple"):
            bow_tie.validate()

    def test_non_positive_radius(self):
        """Circles need a positive radius."""
        with pytest.raises(DegreeError):
            BoundaryCurve.circle((0.0, 0.0), 0.0)


@pytest.mark.unit
class TestWindingDegree:
    """Tests for winding numbers of plane fields."""

    @pytest.mark.parametrize(
        "fn, expected",
        [
            (lambda z: z, 1),
            (lambda z: z**2, 2),
            (lambda z: z**3 - 0.1, 3),
            (lambda z: np.conj(z), -1),
            (lambda z: z + 5.0, 0),
        ],
    )
    def test_unit_circle(self, fn, expected):
        """Classical degrees on the unit circle."""
        curve = BoundaryCurve.circle((0.0, 0.0), 1.0)
        assert degree.winding_degree(_complex_field(fn), curve) == expected

    def test_zero_outside_curve(self):
        """A curve that does not surround the zero has degree 0."""
        curve = BoundaryCurve.circle((3.0, 0.0), 1.0)
        assert degree.winding_degree(_complex_field(lambda z: z), curve) == 0

    def test_reversed_curve_negates(self):
        """Orientation flips the sign."""
        curve = BoundaryCurve.polygon([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])
        f = _complex_field(lambda z: z)
        assert degree.winding_degree(f, curve) == 1
        assert degree.winding_degree(f, curve.reversed()) == -1

    def test_fast_rotation_is_refined(self):
        """z^20 winds 20 times, faster than 64 samples resolve."""
        curve = BoundaryCurve.circle((0.0, 0.0), 1.0)
        f = _complex_field(lambda z: z**20)
        assert degree.winding_degree(f, curve, initial_samples=64) == 20

    def test_zero_on_contour(self):
        """A zero of f on the curve is reported, not rounded away."""
        curve = BoundaryCurve.circle((1.0, 0.0), 1.0)
        with pytest.raises(ZeroOnContourError, match="zero on contour"):
            degree.winding_degree(_complex_field(lambda z: z), curve)

    def test_parallel_pieces_agree(self):
        """Threads do not change the result."""
        curve = BoundaryCurve.polygon(UNIT_SQUARE)
        f = _complex_field(lambda z: (z - (0.5 + 0.5j)) * (z - (0.2 + 0.3j)))
        assert degree.winding_degree(f, curve, max_workers=4) == 2

    def test_sample_cap(self):
        """Exceeding the sample cap fails certification."""
        curve = BoundaryCurve.circle((0.0, 0.0), 1.0)
        with pytest.raises(degree.WindingCertificationError):
            degree.winding_degree(
                _complex_field(lambda z: z**50), curve, initial_samples=8, max_samples=16
            )


@pytest.mark.unit
class TestBrouwerIndex:
    """Tests for local indices on nested circles."""

    def test_saddle_and_source(self):
        """conj(z) has index −1 at 0, z² − 1 has index +1 at 1."""
        assert degree.brouwer_index(_complex_field(np.conj), (0.0, 0.0), 0.5) == -1
        assert degree.brouwer_index(_complex_field(lambda z: z**2 - 1), (1.0, 0.0), 0.5) == 1

    def test_two_zeros_in_disk(self):
        """Nested circles disagree when a second zero is inside the largest one."""
        f = _complex_field(lambda z: z * (z - 0.4))
        with pytest.raises(DegreeError, match="more than one zero"):
            degree.brouwer_index(f, (0.0, 0.0), 0.5)

    def test_min_field_norm(self):
        """|z| on the circle of radius 2 is 2."""
        curve = BoundaryCurve.circle((0.0, 0.0), 2.0)
        assert degree.min_field_norm(_complex_field(lambda z: z), curve) == pytest.approx(2.0)


@pytest.mark.unit
class TestShrunkBoundary:
    """Tests for the inward ε-offset with rounded corners."""

    def test_circle_shrinks_radius(self):
        """A circle keeps its center and loses ε of radius."""
        shrunk = degree.shrunk_boundary(BoundaryCurve.circle((1.0, 2.0), 1.0), 0.1)
        (arc,) = shrunk.pieces
        assert arc.radius == pytest.approx(0.9)
        assert arc.center == (1.0, 2.0)

    def test_square(self):
        """Sides move in by ε, corners become quarter arcs of radius ε."""
        eps = 0.1
        shrunk = degree.shrunk_boundary(BoundaryCurve.polygon(UNIT_SQUARE), eps)
        assert len(shrunk.pieces) == 8
        assert shrunk.total_turning() == pytest.approx(2 * math.pi)
        points = shrunk.sample(64)
        distance_to_sides = np.minimum.reduce(
            [points[:, 0], points[:, 1], 1 - points[:, 0], 1 - points[:, 1]]
        )
        assert np.all(distance_to_sides >= eps - 1e-9)
        area = shrunk.signed_area(512)
        assert 0.0 < area < 1.0
        expected = (1 - 2 * eps) ** 2 - (4 - math.pi) * eps**2
        assert area == pytest.approx(expected, rel=1e-4)

    def test_degree_survives_shrinking(self):
        """Zeros well inside stay inside."""
        f = _complex_field(lambda z: z - (0.5 + 0.5j))
        shrunk = degree.shrunk_boundary(BoundaryCurve.polygon(UNIT_SQUARE), 0.05)
        assert degree.winding_degree(f, shrunk) == 1

    def test_accepts_region_objects(self):
        """Anything with a ``boundary`` attribute is accepted."""

        class Holder:
            boundary = BoundaryCurve.polygon(UNIT_SQUARE)

        shrunk = degree.shrunk_boundary(Holder(), 0.1)
        assert shrunk.total_turning() == pytest.approx(2 * math.pi)

    def test_too_large_offset(self):
        """ε larger than the half-width collapses the square."""
        with pytest.raises(OffsetDegeneracyError):
            degree.shrunk_boundary(BoundaryCurve.polygon(UNIT_SQUARE), 0.6)

    def test_non_positive_offset(self):
        """ε must be positive."""
        with pytest.raises(OffsetDegeneracyError):
            degree.shrunk_boundary(BoundaryCurve.polygon(UNIT_SQUARE), 0.0)
