"""
Data models for coriolis-branches

Dataclasses shared between modules.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class RegionLabel(str, Enum):
    """Where (β1, β2) sits in the plane of Hessian eigenvalues."""

    R0 = "R0"
    R1 = "R1"
    R2 = "R2"
    R3 = "R3"
    R4 = "R4"
    C_OFF_BOUNDARY = "C_off_boundary"
    BOUNDARY_OFF_C = "boundary_off_C"
    C_ON_BOUNDARY = "C_on_boundary"

    @property
    def on_axes(self) -> bool:
        return self in (RegionLabel.C_OFF_BOUNDARY, RegionLabel.C_ON_BOUNDARY)


class BranchStatus(str, Enum):
    UNBOUNDED = "unbounded"
    REACHES_BOUNDARY = "reaches_boundary"
    COMPACT_TWO_TRIVIAL = "compact_two_trivial"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues of the Hessian of V at an equilibrium.

    beta3 is None for planar problems.
    """

    beta1: float
    beta2: float
    beta3: float | None = None

    @property
    def spatial(self) -> bool:
        return self.beta3 is not None

    def to_dict(self) -> dict:
        return {"beta1": self.beta1, "beta2": self.beta2, "beta3": self.beta3}


@dataclass(frozen=True)
class GammaRow:
    """A period with nonzero bifurcation number."""

    period: float
    gamma: int
    # False when only the parity of iB is known; gamma is then given for iB = 1
    index_sign_known: bool = True

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "gamma": self.gamma,
            "index_sign_known": self.index_sign_known,
        }


@dataclass(frozen=True)
class BranchOrigin:
    """Trivial closed orbit (T0, q0) a branch emanates from."""

    period: float
    equilibrium: tuple[float, ...]
    gamma: int


@dataclass
class EquilibriumReport:
    """Classification of one equilibrium and the branches predicted from it."""

    betas: SpectralData
    region: RegionLabel
    brouwer_index: int | None
    T_minus: float | None = None
    T_plus: float | None = None
    vertical_period: float | None = None
    imaginary_spectrum: list[tuple[complex, int]] = field(default_factory=list)
    gammas: list[GammaRow] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    location: tuple[float, ...] | None = None

    @property
    def predicted_branches(self) -> int:
        return len(self.gammas)

    def gamma_at(self, period: float, rtol: float = 1e-9) -> int:
        for row in self.gammas:
            if abs(row.period - period) <= rtol * period:
                return row.gamma
        return 0

    def origins(self) -> list[BranchOrigin]:
        if self.location is None:
            raise ValueError("Report has no equilibrium location")
        return [BranchOrigin(row.period, self.location, row.gamma) for row in self.gammas]

    def to_dict(self) -> dict:
        return {
            "location": list(self.location) if self.location is not None else None,
            "betas": self.betas.to_dict(),
            "region": self.region.value,
            "brouwer_index": self.brouwer_index,
            "T_minus": self.T_minus,
            "T_plus": self.T_plus,
            "vertical_period": self.vertical_period,
            "imaginary_spectrum": [
                {"imag": float(np.imag(value)), "multiplicity": mult}
                for value, mult in self.imaginary_spectrum
            ],
            "gammas": [row.to_dict() for row in self.gammas],
            "predicted_branches": self.predicted_branches,
            "flags": list(self.flags),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class ContinuationBounds:
    """Truncation of 'unbounded' and 'reaches the boundary' to desk scale."""

    amplitude: float = 5.0
    period: float = 100.0
    min_boundary_distance: float = 1e-3
    trivial_radius: float = 1e-6


@dataclass
class ClosedOrbit:
    """
    Periodic solution stored as (T, loop).

    loop holds M+1 samples q(kT/M), k = 0..M, so loop[-1] repeats loop[0].
    initial_state is the Hamiltonian state (p, q) at t = 0.
    """

    T: float
    loop: np.ndarray
    initial_state: np.ndarray
    closure_residual: float = 0.0
    energy: float = 0.0

    def amplitude(self, center) -> float:
        """Largest distance of the loop from a point; planar centers are padded with z = 0."""
        c = np.zeros(self.loop.shape[1])
        point = np.asarray(center, dtype=float)
        c[: point.size] = point
        return float(np.max(np.linalg.norm(self.loop - c, axis=1)))

    def max_abs_z(self) -> float:
        if self.loop.shape[1] < 3:
            return 0.0
        return float(np.max(np.abs(self.loop[:, 2])))

    @property
    def closure_gap(self) -> float:
        return float(np.linalg.norm(self.loop[-1] - self.loop[0]))


@dataclass
class Branch:
    """Continued family of closed orbits and how it ended."""

    origin: BranchOrigin
    orbits: list[ClosedOrbit] = field(default_factory=list)
    status: BranchStatus = BranchStatus.BUDGET_EXHAUSTED
    bounds: ContinuationBounds = field(default_factory=ContinuationBounds)
    steps: list[float] = field(default_factory=list)
    evidence: dict = field(default_factory=dict)
    gamma_sum: int | None = None

    def amplitudes(self) -> np.ndarray:
        return np.array([orbit.amplitude(self.origin.equilibrium) for orbit in self.orbits])

    def periods(self) -> np.ndarray:
        return np.array([orbit.T for orbit in self.orbits])

    def to_rows(self) -> list[dict]:
        """One row per orbit, the layout of the branch CSV files."""
        return [
            {
                "step": k,
                "T": orbit.T,
                "amplitude": orbit.amplitude(self.origin.equilibrium),
                "max_abs_z": orbit.max_abs_z(),
                "samples": orbit.loop.shape[0] - 1,
            }
            for k, orbit in enumerate(self.orbits)
        ]
