"""
Floating-point primitives shared by the spectral and classification modules.

Polynomials are stored with degree-descending coefficients, the same order
``numpy.polyval`` expects. Symmetric matrices are immutable after construction.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import hessenberg

from coriolis_branches import config


logger = logging.getLogger(__name__)

# Relative asymmetry accepted (and removed) by SymMatrix.from_array
_SYMMETRY_RTOL = 1e-9


class LinalgError(Exception):
    """Base error for linear-algebra primitives."""

    pass


class SingularMatrixError(LinalgError):
    """Raised when a Morse index is requested at a crossing."""

    pass


class CommutationError(LinalgError):
    """Raised when the block determinant hypothesis B1·B2 = B2·B1 fails."""

    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Real or complex polynomial with degree-descending coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs))
        if c.ndim != 1 or c.size == 0:
            raise LinalgError("Polynomial needs a non-empty 1-D coefficient list")
        if not np.iscomplexobj(c):
            c = c.astype(float)
        nonzero = np.flatnonzero(c != 0)
        c = c[nonzero[0] :] if nonzero.size else c[-1:] * 0
        if not np.all(np.isfinite(c)):
            raise LinalgError("Polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", _frozen(c))

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0

    def evaluate(self, x):
        return np.polyval(self.coeffs, x)

    def reflect(self) -> "Polynomial":
        """Return q(λ) = p(−λ)."""
        powers = np.arange(self.degree, -1, -1)
        return Polynomial(self.coeffs * (-1.0) ** powers)

    def roots(self) -> np.ndarray:
        return np.roots(self.coeffs)

    def norm(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def real(self) -> "Polynomial":
        return Polynomial(np.real(self.coeffs))

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.polymul(self.coeffs, other.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.polysub(self.coeffs, other.coeffs))

    def __repr__(self) -> str:
        return f"Polynomial({np.array2string(self.coeffs, precision=6)})"


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Dense real symmetric matrix; entries are exactly symmetric."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise LinalgError(f"SymMatrix needs a non-empty square array, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise LinalgError("SymMatrix entries are not symmetric; use SymMatrix.from_array")
        object.__setattr__(self, "entries", _frozen(a))

    @classmethod
    def from_array(cls, a) -> "SymMatrix":
        """Symmetrize an array that is symmetric up to rounding.

        Raises:
            LinalgError: If the asymmetry exceeds a relative 1e-9.
        """
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise LinalgError(f"Expected a square array, got shape {a.shape}")
        scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
        if np.max(np.abs(a - a.T), initial=0.0) > _SYMMETRY_RTOL * scale:
            raise LinalgError("Array is not symmetric")
        return cls((a + a.T) / 2)

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries)))


@dataclass(frozen=True, eq=False)
class ComplexMatrix:
    """Dense complex square matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise LinalgError(f"ComplexMatrix needs a non-empty square array, got shape {a.shape}")
        object.__setattr__(self, "entries", _frozen(a))

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.entries))))
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= tol * scale)


MatrixLike = Union[SymMatrix, ComplexMatrix, np.ndarray]


def _as_array(m: MatrixLike) -> np.ndarray:
    if isinstance(m, (SymMatrix, ComplexMatrix)):
        return np.array(m.entries)
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinalgError(f"Expected a square matrix, got shape {a.shape}")
    return a


def char_poly(m: MatrixLike) -> Polynomial:
    """
    Characteristic polynomial det(M − λI).

    The matrix is reduced to upper Hessenberg form H and the leading principal
    minors of H − λI are expanded along their last column. The recurrence only
    multiplies and adds, so it has no pivots to break down on.

    For nonsingular M the two trailing coefficients are replaced by det M and
    −det M·tr(M⁻¹) from an LU factorization. Near a crossing they are products
    of small eigenvalues, and the recurrence loses them to cancellation.

    Args:
        m: Square matrix (symmetric, complex or plain array), order ≤ 12 in practice.

    Returns:
        Polynomial of degree n with leading coefficient (−1)^n. Coefficients
        are real for real input.
    """
    a = _as_array(m)
    n = a.shape[0]
    is_complex = np.iscomplexobj(a)
    h = hessenberg(a)
    dtype = complex if is_complex else float

    # minors[k] = det(H[:k, :k] − λI), degree-descending
    minors: list[np.ndarray] = [np.ones(1, dtype=dtype)]
    for k in range(n):
        pk = np.polymul(np.array([-1.0, h[k, k]], dtype=dtype), minors[k])
        sub = 1.0 + 0j if is_complex else 1.0
        for i in range(k - 1, -1, -1):
            sub = sub * h[i + 1, i]
            term = ((-1.0) ** (k - i)) * h[i, k] * sub * minors[i]
            pk = np.polyadd(pk, term)
        minors.append(pk)

    coeffs = np.array(minors[n])
    _refine_trailing(a, coeffs)
    if not is_complex:
        coeffs = np.real(coeffs)
    return Polynomial(coeffs)


def _refine_trailing(a: np.ndarray, coeffs: np.ndarray) -> None:
    """Overwrite the λ⁰ and λ¹ coefficients with LU-based values, in place."""
    if not np.all(np.isfinite(a)):
        return
    sign, logdet = np.linalg.slogdet(a)
    if sign == 0:
        return
    try:
        trace_inv = np.trace(np.linalg.inv(a))
    except np.linalg.LinAlgError:
        return
    det = sign * np.exp(logdet)
    coeffs[-1] = det
    if coeffs.size > 1:
        coeffs[-2] = -det * trace_inv


def de_gua_positive_count(p: Polynomial, zero_tol: float | None = None) -> int:
    """
    Number of positive roots (with multiplicity) of a real-rooted polynomial.

    Counts sign changes in the coefficient list after deleting zero
    coefficients. A positive ``zero_tol`` also deletes coefficients below that
    fraction of the largest magnitude; the default of 0 deletes exact zeros only,
    since the trailing coefficients of a nearly singular matrix are genuinely
    tiny. Only valid when every root is real; the caller guarantees that.

    Raises:
        LinalgError: For the zero polynomial.
    """
    if p.is_zero:
        raise LinalgError("undefined root count: zero polynomial")
    tol = config.settings.DEGUA_ZERO_TOL if zero_tol is None else zero_tol
    c = np.real(p.coeffs)
    kept = c[np.abs(c) > tol * np.max(np.abs(c))]
    signs = np.sign(kept)
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def is_singular(m: MatrixLike, tol: float | None = None) -> bool:
    """True when σ_min(M) ≤ tol·σ_max(M)."""
    a = _as_array(m)
    tol = config.settings.SINGULAR_TOL if tol is None else tol
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return True
    return bool(s[-1] <= tol * s[0])


def morse_index(m: SymMatrix, tol: float | None = None) -> int:
    """
    Number of negative eigenvalues of a nonsingular symmetric matrix.

    Computed as the De Gua count of char_poly(M) evaluated at −λ.

    Raises:
        SingularMatrixError: If σ_min(M) ≤ SINGULAR_TOL·σ_max(M).
    """
    if is_singular(m, tol):
        raise SingularMatrixError("singular matrix: Morse index undefined at crossing")
    return de_gua_positive_count(char_poly(m).reflect())


def nullity(m: MatrixLike, rtol: float = 1e-10) -> int:
    """Dimension of the kernel from the singular values."""
    s = np.linalg.svd(_as_array(m), compute_uv=False)
    if s[0] == 0.0:
        return s.size
    return int(np.count_nonzero(s <= rtol * s[0]))


def block_det_reduce(b1, b2, b3, b4, tol: float | None = None) -> complex:
    """
    Determinant of the block matrix [[B1, B2], [B3, B4]] when B1 and B2 commute.

    Returns:
        det(B4·B1 − B3·B2).

    Raises:
        CommutationError: If ‖B1B2 − B2B1‖ exceeds the tolerance.
    """
    blocks = [np.asarray(b) for b in (b1, b2, b3, b4)]
    shape = blocks[0].shape
    if len(shape) != 2 or shape[0] != shape[1] or any(b.shape != shape for b in blocks):
        raise LinalgError("Blocks must be square matrices of equal order")
    b1, b2, b3, b4 = blocks
    tol = config.settings.COMMUTE_TOL if tol is None else tol

    commutator = np.linalg.norm(b1 @ b2 - b2 @ b1)
    scale = max(1.0, float(np.linalg.norm(b1) * np.linalg.norm(b2)))
    if commutator > tol * scale:
        raise CommutationError(f"blocks do not commute (‖[B1,B2]‖ = {commutator:.3e})")
    return complex(np.linalg.det(b4 @ b1 - b3 @ b2))
