"""
Hamiltonian flows, periodic-orbit shooting and branch continuation.

States are u = (p, q) with p = q̇ − α_N q. The Hamiltonian is

    H(p, q) = ½|p|² + ⟨p, α_N q⟩ + W(q),   W(q) = V(q) + ½(x² + y²),

and trajectories solve u̇ = J_N H'(u), which is the second order system
q̈ − 2α_N q̇ + V'(q) = 0 written in first order form.
"""

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from tqdm import tqdm

from coriolis_branches import config
from coriolis_branches.models import (
    Branch,
    BranchOrigin,
    BranchStatus,
    ClosedOrbit,
    ContinuationBounds,
)
from coriolis_branches.spectrum import alpha, symplectic_j


logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Corrector iterations per continuation step and the halvings allowed before giving up
CORRECTOR_MAX_ITER = 8
MAX_HALVINGS = 5


class DynamicsError(Exception):
    """Base error for flows, shooting and continuation."""

    pass


class DomainExitError(DynamicsError):
    """The trajectory came too close to ∂Ω or escaped the integration radius."""

    def __init__(self, message: str, exit_time: float):
        super().__init__(message)
        self.exit_time = exit_time


class IntegrationError(DynamicsError):
    """The integrator stopped before reaching the final time."""

    pass


class ShootingError(DynamicsError):
    """Newton shooting did not produce a nontrivial closed orbit."""

    pass


# ============================================================================
# System
# ============================================================================


@dataclass(frozen=True, eq=False)
class HamiltonianSystem:
    """
    Rotating-frame system with potential V on Ω ⊂ ℝᴺ.

    ``gradient`` and ``hessian`` act on a single point of ℝᴺ. ``boundary_distance``
    gives the distance from q to ∂Ω; None means Ω = ℝᴺ. Trajectories leaving the
    ball of radius ``escape_radius`` are stopped.
    """

    dim: int
    potential: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    boundary_distance: Callable[[np.ndarray], float] | None = None
    escape_radius: float = math.inf
    equilibria: tuple[tuple[float, ...], ...] = ()
    name: str = "system"
    alpha_n: np.ndarray = field(init=False, repr=False)
    centrifugal: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise DynamicsError(f"dim must be 2 or 3, got {self.dim}")
        a = alpha(self.dim)
        object.__setattr__(self, "alpha_n", a)
        # −α² = diag(1, 1[, 0])
        object.__setattr__(self, "centrifugal", -(a @ a))

    def amended_gradient(self, q: np.ndarray) -> np.ndarray:
        """W'(q) = V'(q) − α²q."""
        return np.asarray(self.gradient(q), dtype=float) + self.centrifugal @ q


def _split(system: HamiltonianSystem, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = system.dim
    return u[:n], u[n : 2 * n]


def energy(system: HamiltonianSystem, u) -> float:
    """H(p, q) = ½|p|² + ⟨p, α_N q⟩ + W(q)."""
    p, q = _split(system, np.asarray(u, dtype=float))
    return float(
        0.5 * p @ p
        + p @ (system.alpha_n @ q)
        + system.potential(q)
        + 0.5 * q @ (system.centrifugal @ q)
    )


def hamiltonian_vector_field(system: HamiltonianSystem, u) -> np.ndarray:
    """J_N H'(u) = (α_N p − W'(q), p + α_N q)."""
    p, q = _split(system, np.asarray(u, dtype=float))
    a = system.alpha_n
    return np.concatenate([a @ p - system.amended_gradient(q), p + a @ q])


def energy_gradient(system: HamiltonianSystem, u) -> np.ndarray:
    """H'(u) = (p + α_N q, −α_N p + W'(q))."""
    p, q = _split(system, np.asarray(u, dtype=float))
    a = system.alpha_n
    return np.concatenate([p + a @ q, -a @ p + system.amended_gradient(q)])


def hamiltonian_hessian(system: HamiltonianSystem, u) -> np.ndarray:
    """H''(u) = [[I, α], [−α, W''(q)]]."""
    _, q = _split(system, np.asarray(u, dtype=float))
    a = system.alpha_n
    w_pp = np.asarray(system.hessian(q), dtype=float) + system.centrifugal
    return np.block([[np.eye(system.dim), a], [-a, w_pp]])


def jacobian(system: HamiltonianSystem, u) -> np.ndarray:
    """Linearization J_N H''(u) of the vector field."""
    return symplectic_j(system.dim) @ hamiltonian_hessian(system, u)


def to_hamiltonian(q, qdot) -> np.ndarray:
    """(q, q̇) ↦ u = (p, q) with p = q̇ − α_N q."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    if q.shape != qdot.shape or q.ndim != 1:
        raise DynamicsError(f"q and qdot must be vectors of equal length, got {q.shape}, {qdot.shape}")
    return np.concatenate([qdot - alpha(q.size) @ q, q])


def from_hamiltonian(u) -> tuple[np.ndarray, np.ndarray]:
    """u = (p, q) ↦ (q, q̇) with q̇ = p + α_N q."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size % 2:
        raise DynamicsError(f"State must be a vector of even length, got shape {u.shape}")
    n = u.size // 2
    p, q = u[:n], u[n:]
    return q.copy(), p + alpha(n) @ q


def equilibrium_state(q0) -> np.ndarray:
    """u0 = (−α_N q0, q0)."""
    q0 = np.asarray(q0, dtype=float)
    return np.concatenate([-alpha(q0.size) @ q0, q0])


def _padded(point: Sequence[float], dim: int) -> np.ndarray:
    q = np.zeros(dim)
    q[: len(point)] = point
    return q


# ============================================================================
# Integration
# ============================================================================


@dataclass
class FlowResult:
    """End state of an integration together with its samples and dense output."""

    state: np.ndarray
    times: np.ndarray
    states: np.ndarray
    dense: Callable[[np.ndarray], np.ndarray] | None
    energy_drift: float


def _events(system: HamiltonianSystem, offset: int) -> list:
    """Terminal events for the q block starting at ``offset`` in the integrated vector."""
    n = system.dim
    events = []
    if system.boundary_distance is not None:
        limit = config.settings.MIN_PRIMARY_DISTANCE

        def near_boundary(t, y):
            return system.boundary_distance(y[offset : offset + n]) - limit

        near_boundary.terminal = True
        near_boundary.direction = -1
        events.append(near_boundary)

    if math.isfinite(system.escape_radius):

        def escape(t, y):
            return system.escape_radius - np.linalg.norm(y[offset : offset + n])

        escape.terminal = True
        escape.direction = -1
        events.append(escape)
    return events


def _checked(sol, T: float):
    if sol.status == -1:
        raise IntegrationError(f"Integration failed before t = {T}: {sol.message}")
    if sol.status == 1:
        exit_time = float(sol.t[-1])
        raise DomainExitError(f"Trajectory left the domain at t = {exit_time:.6g}", exit_time)
    return sol


def _tolerances(rtol: float | None, atol: float | None) -> tuple[float, float]:
    rtol = config.settings.INTEGRATOR_RTOL if rtol is None else rtol
    atol = config.settings.INTEGRATOR_ATOL if atol is None else atol
    return rtol, atol


def flow(
    system: HamiltonianSystem,
    u0,
    T: float,
    rtol: float | None = None,
    atol: float | None = None,
    samples: int | None = None,
) -> FlowResult:
    """
    Integrate u̇ = J_N H'(u) from u0 over [0, T] with DOP853.

    Args:
        system: Hamiltonian system.
        u0: Initial state (p, q).
        T: Duration, positive.
        rtol: Relative tolerance per step, INTEGRATOR_RTOL by default.
        atol: Absolute tolerance per step, INTEGRATOR_ATOL by default.
        samples: If given, ``states`` holds samples+1 uniformly spaced states.

    Returns:
        FlowResult with the final state and the relative energy drift.

    Raises:
        DomainExitError: If the trajectory approaches ∂Ω or escapes.
        IntegrationError: If the step size underflows.
    """
    if T <= 0:
        raise DynamicsError(f"Duration must be positive, got {T}")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (2 * system.dim,):
        raise DynamicsError(f"Expected a state of length {2 * system.dim}, got shape {u0.shape}")
    rtol, atol = _tolerances(rtol, atol)
    t_eval = None if samples is None else np.linspace(0.0, T, samples + 1)

    sol = _checked(
        solve_ivp(
            lambda t, u: hamiltonian_vector_field(system, u),
            (0.0, T),
            u0,
            method="DOP853",
            rtol=rtol,
            atol=atol,
            events=_events(system, system.dim) or None,
            dense_output=True,
            t_eval=t_eval,
        ),
        T,
    )

    h0 = energy(system, u0)
    values = np.array([energy(system, y) for y in sol.y.T])
    drift = float(np.max(np.abs(values - h0))) / (1.0 + abs(h0))
    if drift > config.settings.ENERGY_TOL:
        logger.warning(f"Energy drift {drift:.3e} over T = {T:.6g} exceeds tolerance")

    return FlowResult(sol.y[:, -1].copy(), sol.t, sol.y.T.copy(), sol.sol, drift)


def _flow_with_stm(
    system: HamiltonianSystem,
    u0: np.ndarray,
    T: float,
    rtol: float | None = None,
    atol: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """End state and monodromy matrix Φ = ∂φ_T/∂u0 from the variational equations."""
    m = 2 * system.dim
    rtol, atol = _tolerances(rtol, atol)

    def variational(t, y):
        u = y[:m]
        phi = y[m:].reshape(m, m)
        return np.concatenate(
            [hamiltonian_vector_field(system, u), (jacobian(system, u) @ phi).ravel()]
        )

    y0 = np.concatenate([u0, np.eye(m).ravel()])
    sol = _checked(
        solve_ivp(
            variational,
            (0.0, T),
            y0,
            method="DOP853",
            rtol=rtol,
            atol=atol,
            events=_events(system, system.dim) or None,
        ),
        T,
    )
    return sol.y[:m, -1].copy(), sol.y[m:, -1].reshape(m, m)


def flow_second_order(
    system: HamiltonianSystem,
    q,
    qdot,
    T: float,
    rtol: float | None = None,
    atol: float | None = None,
    samples: int | None = None,
) -> FlowResult:
    """
    Integrate q̈ = 2α_N q̇ − V'(q) directly.

    The returned states are (q, q̇) rows, not Hamiltonian states.
    """
    if T <= 0:
        raise DynamicsError(f"Duration must be positive, got {T}")
    n = system.dim
    rtol, atol = _tolerances(rtol, atol)
    y0 = np.concatenate([np.asarray(q, dtype=float), np.asarray(qdot, dtype=float)])
    if y0.shape != (2 * n,):
        raise DynamicsError(f"Expected q and qdot of length {n}")
    a = system.alpha_n

    def rhs(t, y):
        v = y[n:]
        return np.concatenate([v, 2.0 * a @ v - np.asarray(system.gradient(y[:n]), dtype=float)])

    t_eval = None if samples is None else np.linspace(0.0, T, samples + 1)
    sol = _checked(
        solve_ivp(
            rhs,
            (0.0, T),
            y0,
            method="DOP853",
            rtol=rtol,
            atol=atol,
            events=_events(system, 0) or None,
            dense_output=True,
            t_eval=t_eval,
        ),
        T,
    )

    h0 = energy(system, to_hamiltonian(y0[:n], y0[n:]))
    values = np.array([energy(system, to_hamiltonian(y[:n], y[n:])) for y in sol.y.T])
    drift = float(np.max(np.abs(values - h0))) / (1.0 + abs(h0))
    return FlowResult(sol.y[:, -1].copy(), sol.t, sol.y.T.copy(), sol.sol, drift)


# ============================================================================
# Closed orbits
# ============================================================================


@dataclass
class HamiltonianLoop:
    """Image of a closed orbit (T, q̄) under Φ: the loops q̄ and p̄ over one period."""

    T: float
    q: np.ndarray
    p: np.ndarray


def phi_map(system: HamiltonianSystem, orbit: ClosedOrbit) -> HamiltonianLoop:
    """Φ(T, q̄) = (T; q̄, p̄) with p̄ = (2π/T)·dq̄/dθ − α_N q̄."""
    n = system.dim
    samples = orbit.loop.shape[0] - 1
    result = flow(system, orbit.initial_state, orbit.T, samples=samples)
    q_bar = result.states[:, n:]
    qdot = np.array([hamiltonian_vector_field(system, u)[n:] for u in result.states])
    dq_dtheta = (orbit.T / TWO_PI) * qdot
    p_bar = (TWO_PI / orbit.T) * dq_dtheta - q_bar @ system.alpha_n.T
    return HamiltonianLoop(orbit.T, q_bar, p_bar)


def _loop_spread(loop: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(loop - loop.mean(axis=0), axis=1)))


def _closed_orbit(
    system: HamiltonianSystem,
    u: np.ndarray,
    T: float,
    rtol: float | None = None,
    atol: float | None = None,
    allow_trivial: bool = False,
) -> ClosedOrbit:
    n = system.dim
    result = flow(system, u, T, rtol, atol, samples=config.settings.LOOP_SAMPLES)
    closure = float(np.linalg.norm(result.state - u))
    if closure >= config.settings.CLOSURE_TOL:
        raise ShootingError(f"Orbit does not close: |φ_T(u) − u| = {closure:.3e}")
    loop = result.states[:, n:].copy()
    if not allow_trivial and _loop_spread(loop) < config.settings.TRIVIAL_RADIUS:
        raise ShootingError("no orbit found: Newton converged to a trivial orbit")
    return ClosedOrbit(
        T=float(T),
        loop=loop,
        initial_state=np.array(u, dtype=float),
        closure_residual=closure,
        energy=energy(system, u),
    )


def shoot_periodic(
    system: HamiltonianSystem,
    seed,
    T_guess: float,
    anchor=None,
    rtol: float | None = None,
    atol: float | None = None,
    max_iter: int | None = None,
) -> ClosedOrbit:
    """
    Newton shooting for a closed orbit through a seed state.

    Unknowns are (u, T). The residual stacks the closure φ_T(u) − u, the phase
    condition ⟨f(u_ref), u − u_ref⟩ and the energy H(u) − H(seed); the
    overdetermined system is solved in the least-squares sense at every step.

    Args:
        system: Hamiltonian system.
        seed: Initial state guess.
        T_guess: Initial period guess.
        anchor: Reference state of the phase condition, the seed by default.
        rtol: Integrator relative tolerance.
        atol: Integrator absolute tolerance.
        max_iter: Newton iterations, SHOOTING_MAX_ITER by default.

    Returns:
        ClosedOrbit whose closure residual is below CLOSURE_TOL.

    Raises:
        ShootingError: If Newton does not converge, stagnates, leaves the domain
            or lands on an equilibrium.
    """
    max_iter = config.settings.SHOOTING_MAX_ITER if max_iter is None else max_iter
    tol = config.settings.SHOOTING_TOL
    m = 2 * system.dim

    u = np.array(seed, dtype=float)
    T = float(T_guess)
    ref = u.copy() if anchor is None else np.asarray(anchor, dtype=float)
    f_ref = hamiltonian_vector_field(system, ref)
    f_norm = float(np.linalg.norm(f_ref))
    direction = f_ref / f_norm if f_norm > 0 else f_ref
    h0 = energy(system, u)

    best = math.inf
    stalled = 0
    residual = math.inf
    for iteration in range(max_iter):
        try:
            end, phi = _flow_with_stm(system, u, T, rtol, atol)
        except DomainExitError as e:
            raise ShootingError(
                f"no orbit found: trajectory left the domain at t = {e.exit_time:.6g}"
            ) from e
        except IntegrationError as e:
            raise ShootingError(f"no orbit found: {e}") from e

        closure = end - u
        residual = float(np.linalg.norm(closure))
        logger.debug(f"Shooting iteration {iteration}: T = {T:.10f}, residual {residual:.3e}")
        if residual < tol:
            return _closed_orbit(system, u, T, rtol, atol)

        if residual < 0.9 * best:
            best = residual
            stalled = 0
        else:
            stalled += 1
            if stalled >= 5:
                raise ShootingError(f"no orbit found: Newton stagnated at residual {best:.3e}")

        rows = np.zeros((m + 2, m + 1))
        rows[:m, :m] = phi - np.eye(m)
        rows[:m, m] = hamiltonian_vector_field(system, end)
        rows[m, :m] = direction
        rows[m + 1, :m] = energy_gradient(system, u)
        rhs = -np.concatenate([closure, [direction @ (u - ref), energy(system, u) - h0]])
        delta = np.linalg.lstsq(rows, rhs, rcond=None)[0]

        u = u + delta[:m]
        T = T + float(delta[m])
        if not np.isfinite(T) or T <= 0 or not np.all(np.isfinite(u)):
            raise ShootingError(f"no orbit found: period left (0, ∞) at iteration {iteration}")

    raise ShootingError(f"no orbit found in {max_iter} iterations (residual {residual:.3e})")


def verify_orbit(
    system: HamiltonianSystem, orbit: ClosedOrbit, rtol: float = 1e-13, atol: float = 1e-14
) -> float:
    """Closure residual |φ_T(u) − u| re-integrated at tightened tolerances."""
    result = flow(system, orbit.initial_state, orbit.T, rtol=rtol, atol=atol)
    return float(np.linalg.norm(result.state - orbit.initial_state))


def linear_seed(
    system: HamiltonianSystem, q0, T0: float, amplitude: float | None = None
) -> np.ndarray:
    """
    Small-amplitude state on the linearized orbit of period T0 around q0.

    Picks the eigenvector of J_N H''(u0) whose eigenvalue is nearest i·2π/T0 and
    the phase that puts the displacement into q.
    """
    amplitude = config.settings.SEED_AMPLITUDE if amplitude is None else amplitude
    n = system.dim
    u_eq = equilibrium_state(q0)
    values, vectors = np.linalg.eig(jacobian(system, u_eq))
    target = 1j * TWO_PI / T0
    k = int(np.argmin(np.abs(values - target)))
    if abs(values[k] - target) > 1e-6 * abs(target):
        logger.warning(
            f"Nearest exponent {values[k]:.6g} is off the expected {target:.6g} for T0 = {T0:.6g}"
        )

    phases = np.linspace(0.0, math.pi, 181)
    candidates = np.real(np.exp(1j * phases)[:, None] * vectors[:, k][None, :])
    q_norms = np.linalg.norm(candidates[:, n:], axis=1)
    best = int(np.argmax(q_norms))
    return u_eq + amplitude * candidates[best] / q_norms[best]


# ============================================================================
# Continuation
# ============================================================================


def _default_bounds() -> ContinuationBounds:
    s = config.settings
    return ContinuationBounds(
        amplitude=s.AMPLITUDE_BOUND,
        period=s.PERIOD_BOUND,
        min_boundary_distance=s.MIN_PRIMARY_DISTANCE,
        trivial_radius=s.TRIVIAL_RADIUS,
    )


def _tangent(system: HamiltonianSystem, u: np.ndarray, end: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Unit kernel vector of [[Φ − I, f(φ_T(u))], [f(u)ᵀ, 0]]."""
    m = 2 * system.dim
    f_u = hamiltonian_vector_field(system, u)
    rows = np.zeros((m + 1, m + 1))
    rows[:m, :m] = phi - np.eye(m)
    rows[:m, m] = hamiltonian_vector_field(system, end)
    rows[m, :m] = f_u / max(float(np.linalg.norm(f_u)), 1e-300)
    svd = np.linalg.svd(rows)
    tangent = svd.Vh[-1]
    return tangent / np.linalg.norm(tangent)


def _correct(
    system: HamiltonianSystem,
    x_prev: np.ndarray,
    tangent: np.ndarray,
    ds: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Pseudo-arclength corrector; returns (x, φ_T(u), Φ, iterations)."""
    m = 2 * system.dim
    tol = config.settings.SHOOTING_TOL
    u_prev = x_prev[:m]
    f_prev = hamiltonian_vector_field(system, u_prev)
    direction = f_prev / max(float(np.linalg.norm(f_prev)), 1e-300)

    x = x_prev + ds * tangent
    for iteration in range(1, CORRECTOR_MAX_ITER + 1):
        u, T = x[:m], x[m]
        end, phi = _flow_with_stm(system, u, T)
        closure = end - u
        phase = float(direction @ (u - u_prev))
        arclength = float(tangent @ (x - x_prev)) - ds
        if np.linalg.norm(closure) < tol and abs(phase) < tol and abs(arclength) < tol:
            return x, end, phi, iteration

        rows = np.zeros((m + 2, m + 1))
        rows[:m, :m] = phi - np.eye(m)
        rows[:m, m] = hamiltonian_vector_field(system, end)
        rows[m, :m] = direction
        rows[m + 1] = tangent
        rhs = -np.concatenate([closure, [phase, arclength]])
        x = x + np.linalg.lstsq(rows, rhs, rcond=None)[0]
        if x[m] <= 0:
            raise ShootingError("Corrector drove the period to zero")

    raise ShootingError(f"Corrector did not converge in {CORRECTOR_MAX_ITER} iterations")


def _trivial_hits(
    system: HamiltonianSystem,
    origin: BranchOrigin,
    orbit: ClosedOrbit,
    bounds: ContinuationBounds,
) -> list[tuple[float, ...]]:
    """Equilibria the orbit has collapsed onto, other than the origin at its own period."""
    n = system.dim
    q0 = _padded(origin.equilibrium, n)
    hits = []
    for eq in (*system.equilibria, tuple(q0)):
        e = _padded(eq, n)
        if orbit.amplitude(e) >= bounds.trivial_radius:
            continue
        at_origin = np.allclose(e, q0, atol=bounds.trivial_radius)
        if at_origin and abs(orbit.T - origin.period) <= 1e-3 * origin.period:
            continue
        key = tuple(float(v) for v in e)
        if key not in hits:
            hits.append(key)
    return hits


def _min_boundary_distance(system: HamiltonianSystem, orbits: Sequence[ClosedOrbit]) -> float:
    if system.boundary_distance is None:
        return math.inf
    return min(float(system.boundary_distance(q)) for orbit in orbits for q in orbit.loop)


def continue_branch(
    system: HamiltonianSystem,
    origin: BranchOrigin,
    max_steps: int | None = None,
    bounds: ContinuationBounds | None = None,
    progress: bool = True,
    gamma_lookup: Callable[[float, tuple[float, ...]], int] | None = None,
) -> Branch:
    """
    Follow the branch of closed orbits emanating from the trivial orbit (T0, q0).

    A first orbit is shot from the linear seed; later orbits come from a
    pseudo-arclength predictor-corrector in (u, T). The step adapts inside
    [CONT_MIN_STEP, CONT_MAX_STEP].

    Args:
        system: Hamiltonian system.
        origin: Emanation point with nonzero bifurcation number.
        max_steps: Continuation steps after the first orbit, CONT_MAX_STEPS by default.
        bounds: Truncation bounds; defaults from settings.
        progress: Show a tqdm bar on terminals.
        gamma_lookup: Bifurcation number of a trivial orbit (T, q), used to
            record the γ sum of compact branches.

    Returns:
        Branch with its terminal status.

    Raises:
        DynamicsError: If γ(T0, q0) = 0.
        ShootingError: If no orbit is found near the trivial orbit.
    """
    if origin.gamma == 0:
        raise DynamicsError(f"Bifurcation number vanishes at T0 = {origin.period:.6g}")
    s = config.settings
    max_steps = s.CONT_MAX_STEPS if max_steps is None else max_steps
    bounds = _default_bounds() if bounds is None else bounds
    m = 2 * system.dim
    q0 = _padded(origin.equilibrium, system.dim)

    branch = Branch(origin=origin, bounds=bounds)
    first = shoot_periodic(system, linear_seed(system, q0, origin.period), origin.period)
    branch.orbits.append(first)
    logger.info(f"First orbit on {system.name} branch: T = {first.T:.8f}")

    end, phi = _flow_with_stm(system, first.initial_state, first.T)
    tangent = _tangent(system, first.initial_state, end, phi)
    if tangent[:m] @ (first.initial_state - equilibrium_state(q0)) < 0:
        tangent = -tangent

    ds = s.CONT_INITIAL_STEP
    halvings = 0
    with tqdm(
        total=max_steps,
        desc=f"T0={origin.period:.4f}",
        unit="orbit",
        disable=None if progress else True,
    ) as bar:
        while len(branch.orbits) <= max_steps:
            prev = branch.orbits[-1]
            x_prev = np.append(prev.initial_state, prev.T)
            try:
                x, end, phi, iterations = _correct(system, x_prev, tangent, ds)
                orbit = _closed_orbit(system, x[:m], x[m], allow_trivial=True)
            except DomainExitError as e:
                branch.status = BranchStatus.REACHES_BOUNDARY
                branch.evidence["domain_exit_time"] = e.exit_time
                break
            except (ShootingError, IntegrationError) as e:
                halvings += 1
                ds /= 2.0
                logger.debug(f"Corrector failed ({e}); step halved to {ds:.3e}")
                if halvings > MAX_HALVINGS or ds < s.CONT_MIN_STEP:
                    logger.warning(f"Corrector failed after {halvings} step halvings, branch truncated")
                    branch.status = BranchStatus.BUDGET_EXHAUSTED
                    branch.evidence["corrector_failed"] = True
                    break
                continue

            branch.orbits.append(orbit)
            branch.steps.append(ds)
            bar.update(1)
            halvings = 0

            status = _step_status(system, branch, orbit, gamma_lookup)
            if status is not None:
                branch.status = status
                break

            if iterations <= 3:
                ds = min(ds * 1.5, s.CONT_MAX_STEP)
            new_tangent = _tangent(system, x[:m], end, phi)
            tangent = new_tangent if new_tangent @ tangent >= 0 else -new_tangent

    _reconcile_status(branch, system)
    logger.info(
        f"Branch from T0 = {origin.period:.6f} ended as {branch.status.value} "
        f"after {len(branch.orbits)} orbits"
    )
    return branch


def _reconcile_status(branch: Branch, system: HamiltonianSystem) -> None:
    """Merge the re-derived evidence into the branch and record a status disagreement."""
    rederived, evidence = branch_status(branch, system)
    branch.evidence = {**evidence, **branch.evidence}
    if rederived != branch.status:
        branch.evidence["rederived_status"] = rederived.value
        logger.warning(
            f"Branch from T0 = {branch.origin.period:.6f} stopped as {branch.status.value}, "
            f"but its stored orbits classify as {rederived.value}"
        )


def _step_status(
    system: HamiltonianSystem,
    branch: Branch,
    orbit: ClosedOrbit,
    gamma_lookup: Callable[[float, tuple[float, ...]], int] | None,
) -> BranchStatus | None:
    bounds = branch.bounds
    q0 = _padded(branch.origin.equilibrium, system.dim)
    if orbit.amplitude(q0) > bounds.amplitude or orbit.T > bounds.period:
        return BranchStatus.UNBOUNDED
    if _min_boundary_distance(system, [orbit]) < bounds.min_boundary_distance:
        return BranchStatus.REACHES_BOUNDARY
    hits = _trivial_hits(system, branch.origin, orbit, bounds)
    if hits:
        if gamma_lookup is not None:
            branch.gamma_sum = branch.origin.gamma + gamma_lookup(orbit.T, hits[0])
        return BranchStatus.COMPACT_TWO_TRIVIAL
    return None


def branch_status(branch: Branch, system: HamiltonianSystem) -> tuple[BranchStatus, dict]:
    """
    Re-derive the terminal status of a branch from its stored orbits.

    Evidence keys: sup_norm (max of T and sup|q̄|), max_period, max_amplitude,
    min_boundary_distance, trivial_proximity and blue_sky_candidate.

    Raises:
        DynamicsError: If the branch holds no orbits.
    """
    if not branch.orbits:
        raise DynamicsError("Branch has no orbits")
    bounds = branch.bounds
    q0 = _padded(branch.origin.equilibrium, system.dim)

    amplitudes = np.array([orbit.amplitude(q0) for orbit in branch.orbits])
    periods = branch.periods()
    sup_norm = max(max(orbit.T, float(np.max(np.abs(orbit.loop)))) for orbit in branch.orbits)
    min_distance = _min_boundary_distance(system, branch.orbits)
    proximity = [
        {"step": k, "T": orbit.T, "equilibrium": list(hit)}
        for k, orbit in enumerate(branch.orbits)
        for hit in _trivial_hits(system, branch.origin, orbit, bounds)
    ]

    max_amplitude = float(np.max(amplitudes))
    max_period = float(np.max(periods))
    blue_sky = max_period > bounds.period and max_amplitude <= bounds.amplitude
    evidence = {
        "sup_norm": sup_norm,
        "max_period": max_period,
        "max_amplitude": max_amplitude,
        "min_boundary_distance": min_distance,
        "trivial_proximity": proximity,
        "blue_sky_candidate": blue_sky,
    }

    if max_amplitude > bounds.amplitude or max_period > bounds.period:
        evidence["offending_norm"] = max_period if blue_sky else max_amplitude
        if blue_sky:
            evidence["flag"] = "period unbounded (blue-sky candidate)"
        return BranchStatus.UNBOUNDED, evidence
    if min_distance < bounds.min_boundary_distance or "domain_exit_time" in branch.evidence:
        return BranchStatus.REACHES_BOUNDARY, evidence
    if proximity:
        return BranchStatus.COMPACT_TWO_TRIVIAL, evidence
    return BranchStatus.BUDGET_EXHAUSTED, evidence


def continue_all(
    system: HamiltonianSystem,
    origins: Sequence[BranchOrigin],
    max_workers: int | None = None,
    **kwargs,
) -> list[Branch]:
    """
    Continue independent branches, in parallel when ``max_workers`` > 1.

    A branch whose first orbit cannot be found comes back empty with the
    error recorded in its evidence.
    """
    max_workers = config.settings.THREAD_COUNT if max_workers is None else max_workers

    def run(origin: BranchOrigin) -> Branch:
        try:
            return continue_branch(system, origin, **kwargs)
        except DynamicsError as e:
            logger.warning(f"Branch from T0 = {origin.period:.6f} not started: {e}")
            return Branch(origin=origin, evidence={"error": str(e)})

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            return list(executor.map(run, origins))
    return [run(origin) for origin in origins]


# ============================================================================
# Reference systems
# ============================================================================


def quadratic_system(beta1: float, beta2: float, beta3: float | None = None) -> HamiltonianSystem:
    """V(q) = ½Σβᵢqᵢ², whose flow is exp(t·J_N A)."""
    betas = np.array([beta1, beta2] if beta3 is None else [beta1, beta2, beta3], dtype=float)
    return HamiltonianSystem(
        dim=betas.size,
        potential=lambda q: float(0.5 * betas @ (q * q)),
        gradient=lambda q: betas * q,
        hessian=lambda q: np.diag(betas),
        equilibria=(tuple(np.zeros(betas.size)),),
        name=f"quadratic{tuple(betas.tolist())}",
    )


def pathological_system() -> HamiltonianSystem:
    """V(q) = −|q|²/2 − |q|⁴/4 in the plane; the equilibrium is the only periodic solution."""

    def gradient(q):
        return -q * (1.0 + q @ q)

    def hessian(q):
        return -(1.0 + q @ q) * np.eye(2) - 2.0 * np.outer(q, q)

    def potential(q):
        r2 = float(q @ q)
        return -0.5 * r2 - 0.25 * r2 * r2

    return HamiltonianSystem(
        dim=2,
        potential=potential,
        gradient=gradient,
        hessian=hessian,
        escape_radius=1e3,
        equilibria=((0.0, 0.0),),
        name="pathological",
    )


def radial_convexity(q, qdot) -> np.ndarray:
    """
    d²/dt²(|q|²/2) along the pathological system: (ẋ + y)² + (ẏ − x)² + |q|⁴.

    Accepts single points or (n, 2) arrays.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    x, y = q[..., 0], q[..., 1]
    vx, vy = qdot[..., 0], qdot[..., 1]
    r2 = x * x + y * y
    return (vx + y) ** 2 + (vy - x) ** 2 + r2 * r2
