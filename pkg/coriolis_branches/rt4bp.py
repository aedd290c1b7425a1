"""
Restricted triangular four-body problem.

Three primaries of masses m1, m2, m3 (sum 3√3) sit at the vertices

    q1 = (1, 0),  q2 = (−½, √3/2),  q3 = (−½, −√3/2)

of an equilateral triangle of side √3 rotating with unit angular speed. The
potential of the massless fourth body is

    V(q) = −|q̃ − c̃|²/2 − Σ mᵢ/|q − qᵢ|,

with q̃ the projection of q to the plane and c the center of masses. Every zero
of V' lies in one of seven tracked regions: the triangle T, the lenses O1..O3
beyond its sides and the sectors D1..D3 beyond its vertices.
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from coriolis_branches import classify, config, degree, dynamics
from coriolis_branches.linalg import SymMatrix
from coriolis_branches.models import EquilibriumReport, GammaRow, SpectralData
from coriolis_branches.spectrum import HessianData


logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
TOTAL_MASS = 3.0 * SQRT3
PRIMARIES = np.array([[1.0, 0.0], [-0.5, SQRT3 / 2.0], [-0.5, -SQRT3 / 2.0]])
REGION_NAMES = ("T", "O1", "O2", "O3", "D1", "D2", "D3")
EXPECTED_DEGREES = {"T": -2, "O1": 1, "O2": 1, "O3": 1, "D1": -1, "D2": -1, "D3": -1}

# Distance to a primary below which V and its derivatives are refused
SINGULAR_DISTANCE = 1e-9
SEARCH_HALF_WIDTH = 2.8


class RT4BPError(ValueError):
    """Invalid RT4BP input."""

    pass


class SingularityError(RT4BPError):
    """A point sits on top of a primary."""

    pass


class RegionLostZeroError(RT4BPError):
    """A tracked region ended the libration search without a zero of V'."""

    pass


# ============================================================================
# Masses and geometry
# ============================================================================


@dataclass(frozen=True)
class MassTriple:
    """Positive primary masses in normalized units, m1 + m2 + m3 = 3√3."""

    m1: float
    m2: float
    m3: float

    def __post_init__(self):
        masses = (self.m1, self.m2, self.m3)
        if not all(math.isfinite(m) and m > 0 for m in masses):
            raise RT4BPError(f"Masses must be positive and finite, got {masses}")
        total = sum(masses)
        if abs(total - TOTAL_MASS) > 1e-12:
            raise RT4BPError(
                f"Masses must sum to 3√3 = {TOTAL_MASS:.12f}, got {total:.12f} "
                "(use normalized() to rescale)"
            )

    @classmethod
    def equal(cls) -> "MassTriple":
        return cls(SQRT3, SQRT3, SQRT3)

    @classmethod
    def normalized(cls, m1: float, m2: float, m3: float) -> "MassTriple":
        """Rescale positive masses so they sum to 3√3."""
        total = m1 + m2 + m3
        if not (m1 > 0 and m2 > 0 and m3 > 0):
            raise RT4BPError(f"Masses must be positive, got {(m1, m2, m3)}")
        scale = TOTAL_MASS / total
        a, b = m1 * scale, m2 * scale
        return cls(a, b, TOTAL_MASS - a - b)

    @property
    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2, self.m3])

    @property
    def is_equal(self) -> bool:
        return max(self.as_array) - min(self.as_array) <= 1e-12

    def center(self) -> np.ndarray:
        """c = (m1q1 + m2q2 + m3q3)/(3√3)."""
        return self.as_array @ PRIMARIES / TOTAL_MASS

    def to_list(self) -> list[float]:
        return [self.m1, self.m2, self.m3]


def _angle(u: np.ndarray) -> float:
    return math.atan2(u[1], u[0])


@dataclass(frozen=True, eq=False)
class Region:
    """A tracked region: positively oriented boundary, membership test and anchor point."""

    name: str
    boundary: degree.BoundaryCurve
    anchor: tuple[float, float]
    contains: Callable[[np.ndarray], np.ndarray]


def _triangle_region() -> Region:
    def contains(points):
        return np.all(np.atleast_2d(points) @ PRIMARIES.T > -0.5, axis=1)

    return Region("T", degree.BoundaryCurve.polygon(PRIMARIES), (0.0, 0.0), contains)


def _lens_region(i: int) -> Region:
    """Region beyond the side opposite q_i, inside both circles around the other primaries."""
    u = PRIMARIES[i]
    qj, qk = PRIMARIES[(i + 1) % 3], PRIMARIES[(i + 2) % 3]
    tip = -2.0 * u

    around_k = degree.Arc(tuple(qk), SQRT3, _angle(qj - qk), _angle(qj - qk) + math.pi / 3)
    theta = _angle(tip - qj)
    around_j = degree.Arc(tuple(qj), SQRT3, theta, theta + math.pi / 3)
    side = degree.Segment(tuple(around_j.end_point), tuple(around_k.start_point))
    boundary = degree.BoundaryCurve((side, around_k, around_j))

    def contains(points):
        p = np.atleast_2d(points)
        return (
            (p @ u < -0.5)
            & (np.linalg.norm(p - qj, axis=1) < SQRT3)
            & (np.linalg.norm(p - qk, axis=1) < SQRT3)
        )

    anchor = tuple(-1.25 * u)
    return Region(f"O{i + 1}", boundary, anchor, contains)


def _sector_region(i: int) -> Region:
    """Sector of radius √3 and half-angle 30° at q_i, pointing away from the triangle."""
    q = PRIMARIES[i]
    u = q
    phi = _angle(u)
    arc = degree.Arc(tuple(q), SQRT3, phi - math.pi / 6, phi + math.pi / 6)
    boundary = degree.BoundaryCurve(
        (
            degree.Segment(tuple(q), tuple(arc.start_point)),
            arc,
            degree.Segment(tuple(arc.end_point), tuple(q)),
        )
    )
    cos30 = math.cos(math.pi / 6)

    def contains(points):
        d = np.atleast_2d(points) - q
        r = np.linalg.norm(d, axis=1)
        return (r < SQRT3) & (d @ u > r * cos30)

    anchor = tuple(q * (1.0 + SQRT3 / 2.0))
    return Region(f"D{i + 1}", boundary, anchor, contains)


class Geometry:
    """Primaries, center of masses and the seven tracked regions."""

    def __init__(self, masses: MassTriple):
        self.masses = masses
        self.primaries = PRIMARIES.copy()
        self.center = masses.center()
        regions = [_triangle_region()]
        regions += [_lens_region(i) for i in range(3)]
        regions += [_sector_region(i) for i in range(3)]
        self.regions: dict[str, Region] = {r.name: r for r in regions}

    def region(self, name: str) -> Region:
        try:
            return self.regions[name]
        except KeyError as e:
            raise RT4BPError(f"Unknown region {name!r}; expected one of {REGION_NAMES}") from e

    def region_of(self, points) -> np.ndarray:
        """Name of the tracked region holding each point, '' outside all of them."""
        p = np.atleast_2d(np.asarray(points, dtype=float))[:, :2]
        labels = np.full(p.shape[0], "", dtype=object)
        for name, region in self.regions.items():
            labels[region.contains(p)] = name
        return labels

    @staticmethod
    def rotate(points, k: int = 1) -> np.ndarray:
        """Rotate plane points by 2πk/3 about the origin."""
        theta = 2.0 * math.pi * k / 3.0
        c, s = math.cos(theta), math.sin(theta)
        return np.atleast_2d(points) @ np.array([[c, s], [-s, c]])


# ============================================================================
# Potential and derivatives
# ============================================================================


def _prepare(points) -> tuple[np.ndarray, bool]:
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[1] not in (2, 3):
        raise RT4BPError(f"Points must live in the plane or in space, got shape {p.shape}")
    return p, single


def _displacements(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    prim = np.zeros((3, p.shape[1]))
    prim[:, :2] = PRIMARIES
    d = p[:, None, :] - prim[None, :, :]
    return d, np.linalg.norm(d, axis=2)


def _guard(r: np.ndarray) -> None:
    if np.any(r < SINGULAR_DISTANCE):
        raise SingularityError(f"Point within {SINGULAR_DISTANCE} of a primary")


def _raw_gradient(p: np.ndarray, m: MassTriple, r_check: bool = False) -> np.ndarray:
    d, r = _displacements(p)
    if r_check:
        _guard(r)
    g = np.einsum("i,kij->kj", m.as_array, d / r[..., None] ** 3)
    g[:, :2] -= p[:, :2] - m.center()
    return g


def _raw_hessian(p: np.ndarray, m: MassTriple, r_check: bool = False) -> np.ndarray:
    d, r = _displacements(p)
    if r_check:
        _guard(r)
    mass = m.as_array
    dim = p.shape[1]
    h = np.einsum("i,ki->k", mass, r**-3)[:, None, None] * np.eye(dim)
    h -= 3.0 * np.einsum("i,ki,kia,kib->kab", mass, r**-5, d, d)
    h[:, 0, 0] -= 1.0
    h[:, 1, 1] -= 1.0
    return h


def potential(q, m: MassTriple):
    """V at a point (float) or at each row of an array."""
    p, single = _prepare(q)
    d, r = _displacements(p)
    _guard(r)
    shifted = p[:, :2] - m.center()
    v = -0.5 * np.sum(shifted**2, axis=1) - (m.as_array / r).sum(axis=1)
    return float(v[0]) if single else v


def gradient(points, m: MassTriple) -> np.ndarray:
    """∇V = −(q̃ − c̃, 0) + Σ mᵢ(q − qᵢ)/|q − qᵢ|³, vectorized over rows."""
    p, single = _prepare(points)
    g = _raw_gradient(p, m, r_check=True)
    return g[0] if single else g


def hessian(points, m: MassTriple) -> np.ndarray:
    """V'' = −diag(1, 1[, 0]) + Σ mᵢ(I/r³ − 3ddᵀ/r⁵), vectorized over rows."""
    p, single = _prepare(points)
    h = _raw_hessian(p, m, r_check=True)
    return h[0] if single else h


def grad_hess(q, m: MassTriple) -> tuple[np.ndarray, SymMatrix]:
    """Gradient and symmetric Hessian at a single point."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise RT4BPError("grad_hess takes a single point")
    return gradient(q, m), SymMatrix.from_array(hessian(q, m))


def gradient_field(m: MassTriple) -> degree.PlanarField:
    """V' restricted to the plane as a field for winding computations."""
    return degree.PlanarField(lambda points: _raw_gradient(np.atleast_2d(points), m))


# ============================================================================
# Libration points
# ============================================================================


@dataclass
class LibrationPoint:
    """A zero of V' in the plane together with its classification."""

    position: tuple[float, float]
    masses: MassTriple
    betas: SpectralData
    region_tag: str
    report: EquilibriumReport
    degree_index: int | None = None
    planar_gammas: list[GammaRow] = field(default_factory=list)

    @property
    def brouwer_index(self) -> int:
        """Degree-computed index at degenerate points, sign(β1β2) elsewhere."""
        return self.report.brouwer_index if self.degree_index is None else self.degree_index

    @property
    def vertical_period(self) -> float:
        return 2.0 * math.pi / math.sqrt(self.betas.beta3)

    @property
    def gamma3_vertical(self) -> int:
        return classify.gamma3(
            self.betas.beta1,
            self.betas.beta2,
            self.betas.beta3,
            self.brouwer_index,
            self.vertical_period,
        )

    def to_dict(self) -> dict:
        return {
            "position": list(self.position),
            "region": self.region_tag,
            "brouwer_index": self.brouwer_index,
            "vertical_period": self.vertical_period,
            "gamma3_vertical": self.gamma3_vertical,
            "planar_gammas": [row.to_dict() for row in self.planar_gammas],
            "report": self.report.to_dict(),
        }


def _newton(seeds: np.ndarray, m: MassTriple) -> np.ndarray:
    """Damped Newton on V' for every seed at once; diverged seeds end as NaN rows."""
    s = config.settings
    x = seeds.copy()
    with np.errstate(all="ignore"):
        g = _raw_gradient(x, m)
        norm = np.linalg.norm(g, axis=1)
        for iteration in range(s.NEWTON_MAX_ITER):
            h = _raw_hessian(x, m)
            a, b, d = h[:, 0, 0], h[:, 0, 1], h[:, 1, 1]
            det = a * d - b * b
            step = -np.column_stack([d * g[:, 0] - b * g[:, 1], a * g[:, 1] - b * g[:, 0]])
            step /= det[:, None]

            trial = x + step
            g_trial = _raw_gradient(trial, m)
            n_trial = np.linalg.norm(g_trial, axis=1)
            worse = ~(n_trial <= norm)
            if worse.any():
                trial[worse] = x[worse] + s.NEWTON_DAMPING * step[worse]
                g_trial[worse] = _raw_gradient(trial[worse], m)
                n_trial[worse] = np.linalg.norm(g_trial[worse], axis=1)

            x, g, norm = trial, g_trial, n_trial
            x[np.linalg.norm(x, axis=1) > 10.0] = np.nan
            if not np.any(norm > s.GRAD_TOL):
                logger.debug(f"Newton settled after {iteration + 1} iterations")
                break
    x[~(norm < s.GRAD_TOL)] = np.nan
    return x


def _deduplicate(points: np.ndarray, radius: float) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for p in np.unique(np.round(points, 9), axis=0):
        if all(np.linalg.norm(p - k) > radius for k in kept):
            kept.append(p)
    return kept


def _polish(p: np.ndarray, m: MassTriple, steps: int = 3) -> np.ndarray:
    for _ in range(steps):
        g = _raw_gradient(p[None, :], m)[0]
        h = _raw_hessian(p[None, :], m)[0]
        try:
            p = p - np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            logger.debug(f"Singular Hessian while polishing {tuple(p)}; keeping the iterate")
            break
    return p


def _classify_point(position: np.ndarray, m: MassTriple, tag: str) -> LibrationPoint:
    s = config.settings
    q3 = np.array([position[0], position[1], 0.0])
    _, h3 = grad_hess(q3, m)
    betas = HessianData(3, h3).betas()
    if betas.beta3 is None or betas.beta3 <= 0:
        raise RT4BPError(f"beta3 must be positive at {tuple(position)}, got {betas.beta3}")

    degree_index = None
    if abs(np.linalg.det(h3.entries[:2, :2])) < s.DEGENERATE_DET_TOL:
        degree_index = degree.brouwer_index(gradient_field(m), position, s.INDEX_RADIUS)
        logger.info(f"Degenerate point at {tuple(position)}: index {degree_index} from degree")

    on_axes = classify.region(betas.beta1, betas.beta2).on_axes
    ib = degree_index if on_axes else None
    location = (float(position[0]), float(position[1]))
    report = classify.emanation_report(betas, ib=ib, location=location)
    planar = classify.emanation_report(SpectralData(betas.beta1, betas.beta2), ib=ib)
    return LibrationPoint(location, m, betas, tag, report, degree_index, planar.gammas)


def find_librations(m: MassTriple, geometry: Geometry | None = None) -> list[LibrationPoint]:
    """
    Locate every zero of V' in the seven tracked regions.

    Seeds on a uniform grid over the regions run a damped Newton iteration;
    converged points are deduplicated, checked to lie inside a region and
    classified.

    Raises:
        RegionLostZeroError: If some tracked region holds no zero.
    """
    s = config.settings
    geometry = Geometry(m) if geometry is None else geometry
    axis = np.arange(-SEARCH_HALF_WIDTH, SEARCH_HALF_WIDTH + 1e-12, s.NEWTON_GRID_SPACING)
    xx, yy = np.meshgrid(axis, axis)
    grid = np.column_stack([xx.ravel(), yy.ravel()])
    seeds = grid[geometry.region_of(grid) != ""]
    logger.info(f"Running Newton from {len(seeds)} seeds")

    converged = _newton(seeds, m)
    converged = converged[np.all(np.isfinite(converged), axis=1)]
    candidates = _deduplicate(converged, s.DEDUP_RADIUS)

    points: list[LibrationPoint] = []
    for p in candidates:
        p = _polish(p, m)
        tag = geometry.region_of(p)[0]
        if not tag:
            logger.warning(f"Zero of V' at {tuple(p)} lies outside the tracked regions, dropped")
            continue
        if np.linalg.norm(gradient(p, m)) >= s.GRAD_TOL:
            logger.warning(f"Point {tuple(p)} does not meet the gradient tolerance, dropped")
            continue
        points.append(_classify_point(p, m, tag))

    points.sort(key=lambda lp: (REGION_NAMES.index(lp.region_tag), lp.position))
    for name in REGION_NAMES:
        if not any(lp.region_tag == name for lp in points):
            raise RegionLostZeroError(f"region {name} lost a zero")
    logger.info(f"Found {len(points)} libration points")
    return points


# ============================================================================
# Degrees and the full analysis
# ============================================================================


def region_degree(
    m: MassTriple, name: str, eps: float | None = None, geometry: Geometry | None = None
) -> int:
    """Winding degree of V' along the region boundary pushed ε inward."""
    eps = config.settings.DEGREE_EPSILON if eps is None else eps
    geometry = Geometry(m) if geometry is None else geometry
    curve = degree.shrunk_boundary(geometry.region(name), eps)
    return degree.winding_degree(gradient_field(m), curve)


def boundary_margin(m: MassTriple, per_piece: int = 512, geometry: Geometry | None = None) -> float:
    """Smallest |V'| over all region boundaries, primaries excluded."""
    geometry = Geometry(m) if geometry is None else geometry
    smallest = math.inf
    for region in geometry.regions.values():
        points = region.boundary.sample(per_piece)
        _, r = _displacements(points)
        points = points[np.all(r > 1e-6, axis=1)]
        norms = np.linalg.norm(_raw_gradient(points, m), axis=1)
        smallest = min(smallest, float(norms.min()))
    return smallest


def hamiltonian_system(
    m: MassTriple, dim: int = 3, equilibria: list[LibrationPoint] | None = None
) -> dynamics.HamiltonianSystem:
    """The RT4BP on Ω = ℝᴺ minus the primaries."""
    prim = np.zeros((3, dim))
    prim[:, :2] = PRIMARIES

    def boundary_distance(q):
        return float(np.min(np.linalg.norm(prim - q, axis=1)))

    points = () if equilibria is None else tuple(lp.position for lp in equilibria)
    return dynamics.HamiltonianSystem(
        dim=dim,
        potential=lambda q: potential(q, m),
        gradient=lambda q: gradient(q, m),
        hessian=lambda q: hessian(q, m),
        boundary_distance=boundary_distance,
        equilibria=points,
        name=f"rt4bp-{dim}d",
    )


@dataclass
class RT4BPReport:
    """Outcome of the libration analysis for one mass triple."""

    masses: MassTriple
    points: list[LibrationPoint]
    degrees: dict[str, int]
    index_sums: dict[str, int]
    chosen: dict[str, LibrationPoint | None]
    boundary_margin: float
    claims: dict[str, bool]

    @property
    def all_claims_hold(self) -> bool:
        return all(self.claims.values())

    def points_in(self, name: str) -> list[LibrationPoint]:
        return [lp for lp in self.points if lp.region_tag == name]

    def to_dict(self) -> dict:
        regions = {}
        for name in REGION_NAMES:
            chosen = self.chosen[name]
            regions[name] = {
                "degree": self.degrees[name],
                "index_sum": self.index_sums[name],
                "points": len(self.points_in(name)),
                "chosen": None
                if chosen is None
                else {
                    "position": list(chosen.position),
                    "vertical_period": chosen.vertical_period,
                    "gamma3": chosen.gamma3_vertical,
                },
            }
        return {
            "masses": self.masses.to_list(),
            "point_count": len(self.points),
            "points": [lp.to_dict() for lp in self.points],
            "regions": regions,
            "boundary_margin": self.boundary_margin,
            "claims": dict(self.claims),
            "all_claims_hold": self.all_claims_hold,
        }


def analyze(m: MassTriple, eps: float | None = None, max_workers: int | None = None) -> RT4BPReport:
    """
    Locate and classify the libration points and check them against the region degrees.

    Args:
        m: Primary masses.
        eps: Inward offset of the region boundaries, DEGREE_EPSILON by default.
        max_workers: Threads for the per-region degree computations.

    Raises:
        RegionLostZeroError: If a tracked region yields no zero.
    """
    max_workers = config.settings.THREAD_COUNT if max_workers is None else max_workers
    geometry = Geometry(m)
    points = find_librations(m, geometry)

    def run(name: str) -> int:
        return region_degree(m, name, eps, geometry)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            degrees = dict(zip(REGION_NAMES, executor.map(run, REGION_NAMES)))
    else:
        degrees = {name: run(name) for name in REGION_NAMES}

    index_sums = {
        name: sum(lp.brouwer_index for lp in points if lp.region_tag == name)
        for name in REGION_NAMES
    }

    chosen: dict[str, LibrationPoint | None] = {}
    for name in REGION_NAMES:
        branching = [lp for lp in points if lp.region_tag == name and lp.gamma3_vertical != 0]
        anchor = np.asarray(geometry.region(name).anchor)
        chosen[name] = min(
            branching,
            key=lambda lp: float(np.linalg.norm(np.asarray(lp.position) - anchor)),
            default=None,
        )

    margin = boundary_margin(m, geometry=geometry)
    claims: dict[str, bool] = {}
    if m.is_equal:
        claims["ten_points_equal_masses"] = len(points) == 10
    claims["one_zero_per_region"] = all(
        any(lp.region_tag == name for lp in points) for name in REGION_NAMES
    )
    claims["degrees_match_expected"] = degrees == EXPECTED_DEGREES
    claims["index_sums_match_degrees"] = index_sums == degrees
    claims["at_least_seven_branches"] = sum(lp is not None for lp in chosen.values()) >= 7
    claims["no_zero_on_boundary"] = margin > 1e-6

    for claim, holds in claims.items():
        if not holds:
            logger.warning(f"Claim {claim} fails for masses {m.to_list()}")
    logger.info(f"Degrees {degrees}, boundary margin {margin:.4f}")
    return RT4BPReport(m, points, degrees, index_sums, chosen, margin, claims)
