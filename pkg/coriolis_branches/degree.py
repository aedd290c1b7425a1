"""
Brouwer degree of planar vector fields via winding numbers along closed curves.

A closed curve is a chain of oriented segments and circular arcs. The winding
number of f along the curve is accumulated from angle increments between
consecutive samples; each increment is kept below π/2 by bisection so the
integer result cannot alias.
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np


logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
MAX_SAMPLES = 2**20
CLOSURE_TOL = 1e-12


class DegreeError(Exception):
    """Base error for degree computations."""

    pass


class ZeroOnContourError(DegreeError):
    """The field comes closer to zero than its declared margin on the contour."""

    pass


class WindingCertificationError(DegreeError):
    """Refinement could not bring every angle increment below π/2."""

    pass


class OffsetDegeneracyError(DegreeError):
    """The inward offset of a boundary collapses for the requested ε."""

    pass


# ============================================================================
# Curve pieces
# ============================================================================


def _left_normal(u: np.ndarray) -> np.ndarray:
    return np.array([-u[1], u[0]])


def _angle_of(v: np.ndarray) -> float:
    return math.atan2(v[1], v[0])


@dataclass(frozen=True)
class Segment:
    start: tuple[float, float]
    end: tuple[float, float]

    def points(self, t: np.ndarray) -> np.ndarray:
        a = np.asarray(self.start)
        b = np.asarray(self.end)
        return a + np.asarray(t)[:, None] * (b - a)

    @property
    def start_point(self) -> np.ndarray:
        return np.asarray(self.start, dtype=float)

    @property
    def end_point(self) -> np.ndarray:
        return np.asarray(self.end, dtype=float)

    @property
    def direction(self) -> np.ndarray:
        d = self.end_point - self.start_point
        return d / np.linalg.norm(d)

    def start_tangent(self) -> np.ndarray:
        return self.direction

    def end_tangent(self) -> np.ndarray:
        return self.direction

    def turning(self) -> float:
        return 0.0

    def reversed(self) -> "Segment":
        return Segment(self.end, self.start)


@dataclass(frozen=True)
class Arc:
    """Circular arc from angle theta0 to theta1; counterclockwise when theta1 > theta0."""

    center: tuple[float, float]
    radius: float
    theta0: float
    theta1: float

    def points(self, t: np.ndarray) -> np.ndarray:
        theta = self.theta0 + np.asarray(t) * (self.theta1 - self.theta0)
        c = np.asarray(self.center)
        return c + self.radius * np.column_stack([np.cos(theta), np.sin(theta)])

    def _point_at(self, theta: float) -> np.ndarray:
        return np.asarray(self.center) + self.radius * np.array([math.cos(theta), math.sin(theta)])

    @property
    def start_point(self) -> np.ndarray:
        return self._point_at(self.theta0)

    @property
    def end_point(self) -> np.ndarray:
        return self._point_at(self.theta1)

    @property
    def sweep(self) -> float:
        return self.theta1 - self.theta0

    def _tangent(self, theta: float) -> np.ndarray:
        return math.copysign(1.0, self.sweep) * np.array([-math.sin(theta), math.cos(theta)])

    def start_tangent(self) -> np.ndarray:
        return self._tangent(self.theta0)

    def end_tangent(self) -> np.ndarray:
        return self._tangent(self.theta1)

    def turning(self) -> float:
        return self.sweep

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.theta1, self.theta0)


Piece = Union[Segment, Arc]


@dataclass(frozen=True)
class BoundaryCurve:
    """Closed chain of pieces; positively oriented curves enclose their region on the left."""

    pieces: tuple[Piece, ...]

    def __post_init__(self):
        if not self.pieces:
            raise DegreeError("BoundaryCurve needs at least one piece")
        object.__setattr__(self, "pieces", tuple(self.pieces))
        for current, following in zip(self.pieces, self.pieces[1:] + self.pieces[:1]):
            gap = np.linalg.norm(current.end_point - following.start_point)
            if gap > CLOSURE_TOL:
                raise DegreeError(f"BoundaryCurve is not closed: gap {gap:.3e} between pieces")

    @classmethod
    def circle(cls, center, radius: float) -> "BoundaryCurve":
        if radius <= 0:
            raise DegreeError(f"Circle radius must be positive, got {radius}")
        c = (float(center[0]), float(center[1]))
        return cls((Arc(c, float(radius), 0.0, TWO_PI),))

    @classmethod
    def polygon(cls, vertices) -> "BoundaryCurve":
        v = [tuple(map(float, p)) for p in vertices]
        return cls(tuple(Segment(a, b) for a, b in zip(v, v[1:] + v[:1])))

    def reversed(self) -> "BoundaryCurve":
        return BoundaryCurve(tuple(p.reversed() for p in reversed(self.pieces)))

    def total_turning(self) -> float:
        """Sum of arc sweeps plus the signed exterior angles at the joins."""
        total = 0.0
        for current, following in zip(self.pieces, self.pieces[1:] + self.pieces[:1]):
            total += current.turning()
            a = current.end_tangent()
            b = following.start_tangent()
            total += math.atan2(a[0] * b[1] - a[1] * b[0], float(a @ b))
        return total

    def sample(self, per_piece: int = 32) -> np.ndarray:
        """Closed polyline through the curve, last point dropped."""
        t = np.linspace(0.0, 1.0, per_piece, endpoint=False)
        return np.vstack([piece.points(t) for piece in self.pieces])

    def signed_area(self, per_piece: int = 256) -> float:
        p = self.sample(per_piece)
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    def validate(self, per_piece: int = 32) -> None:
        """Raise DegreeError if the sampled polyline crosses itself."""
        p = self.sample(per_piece)
        q = np.roll(p, -1, axis=0)
        k = p.shape[0]
        i, j = np.triu_indices(k, 2)
        keep = ~((i == 0) & (j == k - 1))
        i, j = i[keep], j[keep]

        def cross(o, a, b):
            return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (
                b[..., 0] - o[..., 0]
            )

        d1 = cross(p[j], q[j], p[i])
        d2 = cross(p[j], q[j], q[i])
        d3 = cross(p[i], q[i], p[j])
        d4 = cross(p[i], q[i], q[j])
        hits = (d1 * d2 < 0) & (d3 * d4 < 0)
        if np.any(hits):
            raise DegreeError(f"BoundaryCurve is not simple ({int(hits.sum())} crossings)")


# ============================================================================
# Fields and winding numbers
# ============================================================================


@dataclass(frozen=True)
class PlanarField:
    """Vectorized plane field: ``evaluate`` maps an (n, 2) array to an (n, 2) array."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    zero_free_margin: float = 1e-9

    def __post_init__(self):
        if self.zero_free_margin <= 0:
            raise DegreeError("zero_free_margin must be positive")

    def complex_values(self, points: np.ndarray) -> np.ndarray:
        v = np.asarray(self.evaluate(points), dtype=float)
        return v[:, 0] + 1j * v[:, 1]


def _piece_winding(f: PlanarField, piece: Piece, initial: int, budget: int) -> tuple[float, int]:
    t = np.linspace(0.0, 1.0, initial + 1)
    w = f.complex_values(piece.points(t))
    while True:
        magnitude = np.abs(w)
        low = int(np.argmin(magnitude))
        if magnitude[low] < f.zero_free_margin:
            x, y = piece.points(t[low : low + 1])[0]
            raise ZeroOnContourError(
                f"zero on contour: |f| = {magnitude[low]:.3e} at ({x:.6f}, {y:.6f})"
            )

        increments = np.angle(w[1:] * np.conj(w[:-1]))
        coarse = np.abs(increments) >= math.pi / 2
        if not coarse.any():
            return float(increments.sum()), t.size
        if t.size > budget:
            raise WindingCertificationError(
                f"cannot certify winding: more than {budget} samples on one piece"
            )

        mids = 0.5 * (t[:-1][coarse] + t[1:][coarse])
        w_mid = f.complex_values(piece.points(mids))
        order = np.argsort(np.concatenate([t, mids]), kind="stable")
        t = np.concatenate([t, mids])[order]
        w = np.concatenate([w, w_mid])[order]


def winding_degree(
    f: PlanarField,
    curve: BoundaryCurve,
    initial_samples: int = 64,
    max_samples: int = MAX_SAMPLES,
    max_workers: int = 1,
) -> int:
    """
    Winding number of f along ``curve`` around the origin.

    Args:
        f: Field that stays at least ``f.zero_free_margin`` away from zero on the curve.
        curve: Closed boundary curve.
        initial_samples: Uniform samples per piece before refinement.
        max_samples: Total sample cap across pieces.
        max_workers: Threads used to refine pieces concurrently.

    Raises:
        ZeroOnContourError: If the margin is violated at a sample.
        WindingCertificationError: If the sample cap is exceeded.
    """

    def run(piece: Piece) -> tuple[float, int]:
        return _piece_winding(f, piece, initial_samples, max_samples)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = list(executor.map(run, curve.pieces))
    else:
        results = [run(piece) for piece in curve.pieces]

    total_samples = sum(n for _, n in results)
    if total_samples > max_samples:
        raise WindingCertificationError(
            f"cannot certify winding: {total_samples} samples exceed the cap of {max_samples}"
        )
    turns = sum(angle for angle, _ in results) / TWO_PI
    degree = round(turns)
    if abs(turns - degree) > 1e-6:
        raise WindingCertificationError(f"winding sum {turns:.9f} is not an integer")
    logger.debug(f"Winding degree {degree} from {total_samples} samples")
    return int(degree)


def brouwer_index(f: PlanarField, q0, r: float, max_workers: int = 1) -> int:
    """
    Brouwer index of an isolated zero q0: the winding degree on a circle of radius r.

    Circles of radius r, 2r/3 and r/3 must agree; disagreement means another
    zero sits inside the disk.
    """
    degrees = [
        winding_degree(f, BoundaryCurve.circle(q0, radius), max_workers=max_workers)
        for radius in (r, 2 * r / 3, r / 3)
    ]
    if len(set(degrees)) != 1:
        raise DegreeError(f"Disk of radius {r} around {tuple(q0)} holds more than one zero")
    return degrees[0]


def min_field_norm(f: PlanarField, curve: BoundaryCurve, per_piece: int = 512) -> float:
    """Smallest |f| over a uniform sampling of the curve."""
    return float(np.min(np.abs(f.complex_values(curve.sample(per_piece)))))


# ============================================================================
# Inward offsets
# ============================================================================


@dataclass(frozen=True)
class _Offset:
    """A piece pushed a distance d into the region: a line or a circle."""

    kind: str
    anchor: np.ndarray  # point on line, or circle center
    direction: np.ndarray  # unit direction for lines
    radius: float  # circles only


def _offset(piece: Piece, d: float) -> _Offset:
    if isinstance(piece, Segment):
        u = piece.direction
        return _Offset("line", piece.start_point + d * _left_normal(u), u, 0.0)
    # region is on the left of travel: inside a CCW arc, outside a CW one
    radius = piece.radius - math.copysign(d, piece.sweep)
    if radius <= 0:
        raise OffsetDegeneracyError(f"Arc of radius {piece.radius} collapses at offset {d}")
    return _Offset("circle", np.asarray(piece.center, dtype=float), np.zeros(2), radius)


def _intersections(a: _Offset, b: _Offset) -> list[np.ndarray]:
    if a.kind == "line" and b.kind == "line":
        m = np.column_stack([a.direction, -b.direction])
        if abs(np.linalg.det(m)) < 1e-14:
            return []
        s, _ = np.linalg.solve(m, b.anchor - a.anchor)
        return [a.anchor + s * a.direction]
    if a.kind == "circle" and b.kind == "line":
        return _intersections(b, a)
    if a.kind == "line":
        foot = a.anchor + float((b.anchor - a.anchor) @ a.direction) * a.direction
        h2 = b.radius**2 - float(np.sum((foot - b.anchor) ** 2))
        if h2 < 0:
            return []
        h = math.sqrt(h2)
        return [foot - h * a.direction, foot + h * a.direction]
    delta = b.anchor - a.anchor
    dist = float(np.linalg.norm(delta))
    if dist == 0 or dist > a.radius + b.radius or dist < abs(a.radius - b.radius):
        return []
    along = (a.radius**2 - b.radius**2 + dist**2) / (2 * dist)
    h = math.sqrt(max(a.radius**2 - along**2, 0.0))
    e = delta / dist
    base = a.anchor + along * e
    return [base + h * _left_normal(e), base - h * _left_normal(e)]


def _foot(offset: _Offset, p: np.ndarray, eps: float, piece: Piece) -> np.ndarray:
    """Point of the ε-offset of ``piece`` closest to p (p lies on the 2ε-offset)."""
    if offset.kind == "line":
        return p - eps * _left_normal(offset.direction)
    r_eps = piece.radius - math.copysign(eps, piece.sweep)
    v = p - offset.anchor
    return offset.anchor + r_eps * v / np.linalg.norm(v)


def _ccw_sweep(start: float, end: float) -> float:
    return (end - start) % TWO_PI


def shrunk_boundary(region, eps: float) -> BoundaryCurve:
    """
    Positively oriented boundary of the region pushed ε inward, corners rounded.

    Straight sides move ε along their inward normal and arcs change radius by ε.
    Consecutive offsets are joined by arcs of radius ε centered where the
    2ε-offsets of the two adjacent pieces meet.

    Args:
        region: A BoundaryCurve, or any object with a ``boundary`` BoundaryCurve.
        eps: Offset distance.

    Raises:
        OffsetDegeneracyError: If ε is too large for the region's features.
    """
    curve: BoundaryCurve = getattr(region, "boundary", region)
    if eps <= 0:
        raise OffsetDegeneracyError(f"eps must be positive, got {eps}")

    pieces = curve.pieces
    if len(pieces) == 1 and isinstance(pieces[0], Arc):
        arc = pieces[0]
        return BoundaryCurve.circle(arc.center, _offset(arc, eps).radius)

    n = len(pieces)
    # corner k sits between pieces[k] and pieces[k+1]
    corner_centers = []
    for k in range(n):
        current, following = pieces[k], pieces[(k + 1) % n]
        vertex = current.end_point
        candidates = _intersections(_offset(current, 2 * eps), _offset(following, 2 * eps))
        if not candidates:
            raise OffsetDegeneracyError(f"Offsets at corner {k} do not meet for eps = {eps}")
        center = min(candidates, key=lambda c: float(np.linalg.norm(c - vertex)))
        if np.linalg.norm(center - vertex) > 10 * eps / math.sin(math.pi / 12):
            raise OffsetDegeneracyError(f"Corner {k} rounding center drifted for eps = {eps}")
        corner_centers.append(center)

    out: list[Piece] = []
    for k in range(n):
        piece = pieces[k]
        start = _foot(_offset(piece, 2 * eps), corner_centers[k - 1], eps, piece)
        end = _foot(_offset(piece, 2 * eps), corner_centers[k], eps, piece)

        if isinstance(piece, Segment):
            if float((end - start) @ piece.direction) <= 0:
                raise OffsetDegeneracyError(f"Side {k} vanishes at eps = {eps}")
            out.append(Segment(tuple(start), tuple(end)))
        else:
            c = np.asarray(piece.center, dtype=float)
            a0, a1 = _angle_of(start - c), _angle_of(end - c)
            if piece.sweep > 0:
                sweep = _ccw_sweep(a0, a1)
            else:
                sweep = -_ccw_sweep(a1, a0)
            if sweep == 0 or abs(sweep) > abs(piece.sweep) + 1e-9:
                raise OffsetDegeneracyError(f"Arc {k} vanishes at eps = {eps}")
            out.append(Arc(tuple(c), _offset(piece, eps).radius, a0, a0 + sweep))

        following = pieces[(k + 1) % n]
        center = corner_centers[k]
        next_start = _foot(_offset(following, 2 * eps), center, eps, following)
        b0, b1 = _angle_of(end - center), _angle_of(next_start - center)
        corner_sweep = _ccw_sweep(b0, b1)
        if corner_sweep >= math.pi:
            raise OffsetDegeneracyError(f"Corner {k} is not convex")
        if corner_sweep > 1e-12:
            out.append(Arc(tuple(center), eps, b0, b0 + corner_sweep))

    shrunk = BoundaryCurve(tuple(out))
    shrunk.validate()
    return shrunk
