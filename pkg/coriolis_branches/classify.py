"""
Region classification of (β1, β2) and the bifurcation-number tables.

The plane of Hessian eigenvalues is split into

* C, the coordinate axes,
* R0, the part of the third quadrant where the linearization is hyperbolic,
* R1..R4, what is left of the four open quadrants,

and the boundary of R0 is tracked separately on and off the axes. Every
table lookup downstream starts from ``region``.
"""

import logging
import math

import numpy as np

from coriolis_branches import config, linalg, spectrum
from coriolis_branches.models import EquilibriumReport, GammaRow, RegionLabel, SpectralData


logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)


class ClassificationError(ValueError):
    """Inconsistent classification input."""

    pass


class BrouwerIndexRequiredError(ClassificationError):
    """Raised when (β1, β2) lies on C and no Brouwer index was supplied."""

    pass


def _r0_gap(beta1: float, beta2: float) -> float:
    """β1 + β2 − max(−4, −2 − (β1−β2)²/8); negative inside R0."""
    d = beta1 - beta2
    return beta1 + beta2 - max(-4.0, -2.0 - d * d / 8.0)


def region(beta1: float, beta2: float, tol: float | None = None) -> RegionLabel:
    """Classify (β1, β2) with an absolute band ``tol`` on the defining inequalities."""
    tol = config.settings.BOUNDARY_TOL if tol is None else tol
    gap = _r0_gap(beta1, beta2)
    on_axes = abs(beta1) <= tol or abs(beta2) <= tol

    if beta1 < -tol and beta2 < -tol and gap < -tol:
        return RegionLabel.R0
    if beta1 <= tol and beta2 <= tol and gap <= tol:
        return RegionLabel.C_ON_BOUNDARY if on_axes else RegionLabel.BOUNDARY_OFF_C
    if on_axes:
        return RegionLabel.C_OFF_BOUNDARY
    if beta1 > 0 and beta2 > 0:
        return RegionLabel.R1
    if beta1 < 0 and beta2 > 0:
        return RegionLabel.R2
    if beta1 < 0 and beta2 < 0:
        return RegionLabel.R3
    return RegionLabel.R4


def T_periods(beta1: float, beta2: float) -> tuple[float | None, float | None]:
    """
    Periods T₋ ≤ T₊ of the purely imaginary characteristic exponents.

    T± = 2π√2·(β1+β2+4 ∓ 2√2·√(β1+β2+2+(β1−β2)²/8))^(−1/2).

    Returns:
        (T₋, T₊). Both are None on R0 and on C ∩ ∂R0; T₊ is also None
        outside R1 ∪ R3 ∪ (∂R0 minus C).
    """
    label = region(beta1, beta2)
    if label in (RegionLabel.R0, RegionLabel.C_ON_BOUNDARY):
        return None, None

    c1 = beta1 + beta2 + 4.0
    s = beta1 + beta2 + 2.0 + (beta1 - beta2) ** 2 / 8.0
    root = 2.0 * SQRT2 * math.sqrt(max(s, 0.0))

    if label == RegionLabel.BOUNDARY_OFF_C:
        t = TWO_PI * SQRT2 / math.sqrt(c1)
        return t, t

    t_minus = TWO_PI * SQRT2 / math.sqrt(c1 + root)
    if label in (RegionLabel.R1, RegionLabel.R3):
        return t_minus, TWO_PI * SQRT2 / math.sqrt(c1 - root)
    return t_minus, None


def imaginary_spectrum(
    beta1: float, beta2: float, beta3: float | None = None
) -> list[tuple[complex, int]]:
    """
    Purely imaginary eigenvalues of J_N·A with multiplicities, sorted by imaginary part.
    """
    if beta3 is not None and beta3 <= 0:
        raise ClassificationError(f"beta3 must be positive, got {beta3}")

    label = region(beta1, beta2)
    t_minus, t_plus = T_periods(beta1, beta2)
    found: list[tuple[float, int]] = []

    if label in (RegionLabel.R2, RegionLabel.R4):
        found += _pair(TWO_PI / t_minus, 1)
    elif label in (RegionLabel.R1, RegionLabel.R3):
        found += _pair(TWO_PI / t_minus, 1) + _pair(TWO_PI / t_plus, 1)
    elif label == RegionLabel.BOUNDARY_OFF_C:
        found += _pair(TWO_PI / t_minus, 2)
    elif label == RegionLabel.C_ON_BOUNDARY:
        # λ⁴ at the corners (0, −4) and (−4, 0)
        corner = abs(beta1 + beta2 + 4.0) <= config.settings.BOUNDARY_TOL
        found.append((0.0, 4 if corner else 2))
    elif label == RegionLabel.C_OFF_BOUNDARY:
        found.append((0.0, 2))
        found += _pair(TWO_PI / t_minus, 1)

    if beta3 is not None:
        found += _pair(math.sqrt(beta3), 1)

    merged: list[tuple[float, int]] = []
    for value, mult in sorted(found):
        if merged and abs(merged[-1][0] - value) <= 1e-9 * max(1.0, abs(value)):
            merged[-1] = (merged[-1][0], merged[-1][1] + mult)
        else:
            merged.append((value, mult))
    return [(complex(0.0, value), mult) for value, mult in merged]


def _pair(omega: float, mult: int) -> list[tuple[float, int]]:
    return [(-omega, mult), (omega, mult)]


def brouwer_index_from_betas(beta1: float, beta2: float) -> int:
    """i_B(q0, V') = sign(β1β2), valid off C."""
    if region(beta1, beta2).on_axes:
        raise BrouwerIndexRequiredError(
            f"({beta1}, {beta2}) lies on C: the Brouwer index needs a degree computation"
        )
    return int(np.sign(beta1 * beta2))


def _checked_index(beta1: float, beta2: float, ib: int | None) -> int:
    label = region(beta1, beta2)
    if label.on_axes:
        if ib is None:
            raise BrouwerIndexRequiredError(
                f"({beta1}, {beta2}) lies on C: a Brouwer index must be supplied"
            )
        return ib
    expected = int(np.sign(beta1 * beta2))
    if ib is not None and ib != expected:
        raise ClassificationError(
            f"Brouwer index {ib} contradicts sign(beta1*beta2) = {expected} off C"
        )
    return expected


def _matches(T: float, reference: float | None, rtol: float) -> bool:
    return reference is not None and abs(T - reference) <= rtol * reference


def gamma2(beta1: float, beta2: float, ib: int | None, T: float, rtol: float | None = None) -> int:
    """Planar bifurcation number γ₂(T, q0)."""
    if T <= 0:
        raise ClassificationError(f"Period must be positive, got {T}")
    rtol = config.settings.PERIOD_MATCH_RTOL if rtol is None else rtol
    index = _checked_index(beta1, beta2, ib)
    label = region(beta1, beta2)
    t_minus, t_plus = T_periods(beta1, beta2)

    at_minus = _matches(T, t_minus, rtol)
    at_plus = _matches(T, t_plus, rtol)

    if at_minus:
        if label in (RegionLabel.R2, RegionLabel.R4):
            return -1
        if label in (RegionLabel.R1, RegionLabel.R3):
            return 1
        if label == RegionLabel.C_OFF_BOUNDARY:
            return index
    if at_plus:
        if label == RegionLabel.R1:
            return 1
        if label == RegionLabel.R3:
            return -1
    return 0


def gamma3(
    beta1: float,
    beta2: float,
    beta3: float,
    ib: int | None,
    T: float,
    rtol: float | None = None,
) -> int:
    """Spatial bifurcation number γ₃(T, q0)."""
    if beta3 <= 0:
        raise ClassificationError(f"beta3 must be positive, got {beta3}")
    rtol = config.settings.PERIOD_MATCH_RTOL if rtol is None else rtol
    planar = gamma2(beta1, beta2, ib, T, rtol)
    if not _matches(T, TWO_PI / math.sqrt(beta3), rtol):
        return planar

    label = region(beta1, beta2)
    if label in (RegionLabel.R2, RegionLabel.R4):
        return planar - 1
    if label.on_axes:
        return planar + _checked_index(beta1, beta2, ib)
    return planar + 1


def gamma_from_morse_jump(
    betas: SpectralData, ib: int, T: float, eps_rel: float | None = None
) -> int:
    """
    Bifurcation number from its definition, iB·(m⁻(S_{T+ε}) − m⁻(S_{T−ε}))/2.

    Uses assembled matrices and De Gua counts, independent of the closed-form tables.
    """
    eps = (config.settings.JUMP_EPS_REL if eps_rel is None else eps_rel) * T
    h = spectrum.HessianData.from_spectral(betas)
    above = linalg.morse_index(spectrum.build_ST(h, T + eps).S)
    below = linalg.morse_index(spectrum.build_ST(h, T - eps).S)
    return ib * (above - below) // 2


def emanation_report(
    betas: SpectralData,
    ib: int | None = None,
    location: tuple[float, ...] | None = None,
    extremum: bool = False,
    even: bool = False,
) -> EquilibriumReport:
    """
    Classify an equilibrium and list every period with nonzero bifurcation number.

    Args:
        betas: Hessian eigenvalues; beta3 set for spatial problems.
        ib: Brouwer index of q0 under V'. Required on C, derived elsewhere.
        location: Equilibrium position, carried into the report.
        extremum: V restricted to the plane has a strict local extremum at q0.
            On C this fixes iB = 1 when ``ib`` is not given.
        even: V restricted to the plane is even about q0, so iB is odd. On C
            without ``ib`` every γ is still nonzero; rows are given for iB = 1,
            marked with index_sign_known = False, and brouwer_index is None.

    Raises:
        BrouwerIndexRequiredError: On C without ``ib``, ``extremum`` or ``even``.
        ClassificationError: If ``ib`` contradicts sign(β1β2) at a candidate period.
    """
    b1, b2, b3 = betas.beta1, betas.beta2, betas.beta3
    label = region(b1, b2)
    from_extremum = label.on_axes and ib is None and extremum
    from_symmetry = label.on_axes and ib is None and even and not extremum
    if from_extremum or from_symmetry:
        ib = 1
    if label.on_axes:
        index: int | None = _checked_index(b1, b2, ib)
    else:
        index = int(np.sign(b1 * b2))

    t_minus, t_plus = T_periods(b1, b2)
    vertical = TWO_PI / math.sqrt(b3) if b3 is not None else None

    candidates: list[float] = []
    for period in sorted(p for p in (t_minus, t_plus, vertical) if p is not None):
        if not candidates or abs(period - candidates[-1]) > 1e-9 * period:
            candidates.append(period)

    rows = []
    for period in candidates:
        if b3 is None:
            g = gamma2(b1, b2, ib, period)
        else:
            g = gamma3(b1, b2, b3, ib, period)
        if g != 0:
            rows.append(GammaRow(period, g, index_sign_known=not from_symmetry))

    flags: list[str] = []
    notes: list[str] = []
    if from_extremum:
        notes.append("iB = 1 from the local extremum of V in the plane")
    if from_symmetry:
        index = None
        flags.append("index_sign_unknown")
        notes.append("iB is odd since V is even about q0; gammas are given for iB = 1")
    if label == RegionLabel.R0:
        if b3 is None:
            flags.append("nonexistence")
            notes.append("no closed orbits near equilibrium")
        elif rows:
            flags.append("nonplanar")
            notes.append("planar closed orbits are excluded, the emanating branch is nonplanar")
    elif label == RegionLabel.BOUNDARY_OFF_C:
        flags.append("inconclusive")
        notes.append("gamma vanishes at T- = T+; branch existence is open")
    elif label == RegionLabel.C_ON_BOUNDARY:
        corner = abs(b1 + b2 + 4.0) <= config.settings.BOUNDARY_TOL
        if corner:
            flags.append("inconclusive")
        else:
            flags.append("conjectural")
            shown = "sign unknown" if index is None else f"iB = {index}"
            notes.append(f"branch conjectured iff iB < 0 ({shown})")

    logger.debug(f"({b1}, {b2}, {b3}) -> {label.value}, gammas {rows}")
    return EquilibriumReport(
        betas=betas,
        region=label,
        brouwer_index=index,
        T_minus=t_minus,
        T_plus=t_plus,
        vertical_period=vertical,
        imaginary_spectrum=imaginary_spectrum(b1, b2, b3),
        gammas=rows,
        flags=flags,
        notes=notes,
        location=location,
    )
