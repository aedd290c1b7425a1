"""
Structured matrices of the linearized rotating-frame problem.

For an equilibrium q0 with Hessian V''(q0) this module assembles

* α_N, the generator of the rotation (N = 2, 3),
* J_N, the standard symplectic matrix,
* A = H''(u0) = [[I, α], [−α, W'']] with W'' = V'' − α²,
* S_T = [[−(T/2π)A, −J], [J, −(T/2π)A]],

the closed-form characteristic polynomials that factor them, and the
Morse-index tables for S_T.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from coriolis_branches import classify, config
from coriolis_branches.linalg import ComplexMatrix, Polynomial, SymMatrix, char_poly
from coriolis_branches.models import RegionLabel, SpectralData


logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class SpectrumError(ValueError):
    """Invalid input for a spectral construction."""

    pass


class IndexJumpError(SpectrumError):
    """Raised when T sits on a crossing where the Morse index of S_T jumps."""

    pass


def alpha(n: int) -> np.ndarray:
    """Rotation generator α_N."""
    if n == 2:
        return np.array([[0.0, -1.0], [1.0, 0.0]])
    if n == 3:
        return np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    raise SpectrumError(f"alpha is defined for N = 2 or 3, got {n}")


def symplectic_j(n: int) -> np.ndarray:
    """J_N = [[0, −I], [I, 0]] of order 2N."""
    if n not in (2, 3):
        raise SpectrumError(f"J is built for N = 2 or 3, got {n}")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


@dataclass(frozen=True, eq=False)
class HessianData:
    """Second derivatives of V at an equilibrium."""

    dim: int
    vpp: SymMatrix

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise SpectrumError(f"dim must be 2 or 3, got {self.dim}")
        if self.vpp.order != self.dim:
            raise SpectrumError(f"Hessian order {self.vpp.order} does not match dim {self.dim}")
        if self.dim == 3:
            v = self.vpp.entries
            scale = max(1.0, self.vpp.max_abs())
            if abs(v[0, 2]) >= 1e-10 * scale or abs(v[1, 2]) >= 1e-10 * scale:
                raise SpectrumError("Spatial Hessian must not couple z with the plane")
            if v[2, 2] <= 0:
                raise SpectrumError(f"beta3 must be positive, got {v[2, 2]}")

    @classmethod
    def diagonal(cls, beta1: float, beta2: float, beta3: float | None = None) -> "HessianData":
        values = [beta1, beta2] if beta3 is None else [beta1, beta2, beta3]
        return cls(len(values), SymMatrix(np.diag(values)))

    @classmethod
    def from_spectral(cls, betas: SpectralData) -> "HessianData":
        return cls.diagonal(betas.beta1, betas.beta2, betas.beta3)

    @property
    def w_pp(self) -> np.ndarray:
        """Hessian of the amended potential W = V − ½⟨q, α²q⟩."""
        a = alpha(self.dim)
        return self.vpp.entries - a @ a

    def betas(self) -> SpectralData:
        planar = np.linalg.eigvalsh(self.vpp.entries[:2, :2])
        beta3 = float(self.vpp.entries[2, 2]) if self.dim == 3 else None
        return SpectralData(float(planar[0]), float(planar[1]), beta3)


@dataclass(frozen=True, eq=False)
class STMatrix:
    """S_T together with its period."""

    T: float
    S: SymMatrix

    @property
    def dim(self) -> int:
        return self.S.order // 4


def build_A(h: HessianData) -> SymMatrix:
    """A = H''(u0) = [[I, α], [−α, W'']]."""
    a = alpha(h.dim)
    return SymMatrix(np.block([[np.eye(h.dim), a], [-a, h.w_pp]]))


def build_ST(h: HessianData, T: float) -> STMatrix:
    """Assemble S_T for the period T > 0."""
    if T <= 0:
        raise SpectrumError(f"Period must be positive, got {T}")
    block = -(T / TWO_PI) * build_A(h).entries
    j = symplectic_j(h.dim)
    return STMatrix(T, SymMatrix(np.block([[block, -j], [j, block]])))


def build_pT(h: HessianData, T: float) -> ComplexMatrix:
    """−(T/2π)A + iJ_N, the Hermitian half of S_T."""
    if T <= 0:
        raise SpectrumError(f"Period must be positive, got {T}")
    return ComplexMatrix(-(T / TWO_PI) * build_A(h).entries + 1j * symplectic_j(h.dim))


def pT_coeffs(h: HessianData, T: float) -> Polynomial:
    """p_T(λ) = det(−(T/2π)A + iJ − λI); char_poly(S_T) = p_T²."""
    return char_poly(build_pT(h, T)).real()


def jacobian_spectrum(h: HessianData) -> np.ndarray:
    """Eigenvalues of J_N·A, the characteristic exponents at u0."""
    return np.linalg.eigvals(symplectic_j(h.dim) @ build_A(h).entries)


def p2_coeffs(beta1: float, beta2: float) -> Polynomial:
    """p₂(λ) = λ⁴ + (β1+β2+4)λ² + β1β2 = det(J₂A − λI)."""
    return Polynomial([1.0, 0.0, beta1 + beta2 + 4.0, 0.0, beta1 * beta2])


def p3_coeffs(beta1: float, beta2: float, beta3: float) -> Polynomial:
    """p₃(λ) = (λ² + β3)·p₂(λ)."""
    if beta3 <= 0:
        raise SpectrumError(f"beta3 must be positive, got {beta3}")
    return Polynomial([1.0, 0.0, beta3]) * p2_coeffs(beta1, beta2)


def quartic_d_coeffs(beta1: float, beta2: float, T: float) -> Polynomial:
    """
    Quartic whose square is det(S_T − λI₈) in the planar case.

    With c0 = β1β2, c1 = β1+β2+4 and t = T/2π the coefficients are
    d4 = 1, d3 = c1·t, d2 = (c0 + 3c1 − 8)t² − 2,
    d1 = 2(c0 + c1 − 4)t³ − c1·t, d0 = c0·t⁴ − c1·t² + 1.
    """
    if T <= 0:
        raise SpectrumError(f"Period must be positive, got {T}")
    c0 = beta1 * beta2
    c1 = beta1 + beta2 + 4.0
    t = T / TWO_PI
    return Polynomial(
        [
            1.0,
            c1 * t,
            (c0 + 3.0 * c1 - 8.0) * t**2 - 2.0,
            2.0 * (c0 + c1 - 4.0) * t**3 - c1 * t,
            c0 * t**4 - c1 * t**2 + 1.0,
        ]
    )


def vertical_factor(beta3: float, T: float) -> Polynomial:
    """λ² + (β3+1)(T/2π)λ + (β3T² − 4π²)/4π², the z-direction factor of p_T."""
    if beta3 <= 0:
        raise SpectrumError(f"beta3 must be positive, got {beta3}")
    t = T / TWO_PI
    return Polynomial([1.0, (beta3 + 1.0) * t, beta3 * t**2 - 1.0])


def _near(T: float, reference: float | None, rtol: float) -> bool:
    return reference is not None and abs(T - reference) <= rtol * reference


def morse_ST_planar(beta1: float, beta2: float, T: float, rtol: float | None = None) -> int:
    """
    Morse index of S_T for N = 2 from the closed-form table.

    Raises:
        IndexJumpError: If T matches T₋ or T₊ (relative tolerance ``rtol``).
    """
    if T <= 0:
        raise SpectrumError(f"Period must be positive, got {T}")
    rtol = config.settings.PERIOD_MATCH_RTOL if rtol is None else rtol
    label = classify.region(beta1, beta2)
    if label in (RegionLabel.R0, RegionLabel.C_ON_BOUNDARY):
        return 4

    t_minus, t_plus = classify.T_periods(beta1, beta2)
    if _near(T, t_minus, rtol) or _near(T, t_plus, rtol):
        raise IndexJumpError(f"index jump point: T = {T} at a crossing for ({beta1}, {beta2})")
    assert t_minus is not None

    if label == RegionLabel.BOUNDARY_OFF_C:
        return 4
    if label in (RegionLabel.R2, RegionLabel.R4, RegionLabel.C_OFF_BOUNDARY):
        return 4 if T < t_minus else 6

    assert t_plus is not None
    if T < t_minus:
        return 4
    if T < t_plus:
        return 6
    return 8 if label == RegionLabel.R1 else 4


def morse_ST_spatial(
    beta1: float, beta2: float, beta3: float, T: float, rtol: float | None = None
) -> int:
    """Morse index of S_T for N = 3: planar value plus 2 below 2π/√β3, plus 4 above."""
    if beta3 <= 0:
        raise SpectrumError(f"beta3 must be positive, got {beta3}")
    rtol = config.settings.PERIOD_MATCH_RTOL if rtol is None else rtol
    vertical = TWO_PI / math.sqrt(beta3)
    if _near(T, vertical, rtol):
        raise IndexJumpError(f"index jump point: T = {T} equals 2π/√β3")
    planar = morse_ST_planar(beta1, beta2, T, rtol)
    return planar + (2 if T < vertical else 4)
