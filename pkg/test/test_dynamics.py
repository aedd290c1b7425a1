"""Tests for flows, periodic-orbit shooting and branch continuation."""

import dataclasses
import math

import numpy as np
import pytest
from conftest import circle_loop
from scipy.linalg import expm

from coriolis_branches import dynamics, rt4bp
from coriolis_branches.dynamics import DynamicsError, ShootingError
from coriolis_branches.models import Branch, BranchOrigin, BranchStatus, ClosedOrbit
from coriolis_branches.rt4bp import TOTAL_MASS


def _circular_state(radius: float, z: float = 0.0) -> np.ndarray:
    """Far-field circular orbit around the total mass, seen in the rotating frame."""
    q = np.array([radius, 0.0, z])
    nu = 1.0 - math.sqrt(TOTAL_MASS / radius**3)
    qdot = -nu * (dynamics.alpha(3) @ q)
    return dynamics.to_hamiltonian(q, qdot)


def _synthetic_orbit(T: float, radius: float, center=(0.0, 0.0)) -> ClosedOrbit:
    return ClosedOrbit(T=T, loop=circle_loop(center, radius), initial_state=np.zeros(4))


@pytest.mark.unit
class TestStateMaps:
    """Tests for the (q, q̇) ↔ (p, q) change of variables."""

    def test_momentum_definition(self):
        """p = q̇ − α q."""
        u = dynamics.to_hamiltonian([1.0, 2.0], [0.5, -0.5])
        np.testing.assert_allclose(u, [0.5 + 2.0, -0.5 - 1.0, 1.0, 2.0])

    def test_inverse(self):
        """from_hamiltonian undoes to_hamiltonian."""
        q, qdot = np.array([0.3, -1.2, 0.4]), np.array([1.0, 0.1, -0.7])
        q_back, qdot_back = dynamics.from_hamiltonian(dynamics.to_hamiltonian(q, qdot))
        np.testing.assert_allclose(q_back, q)
        np.testing.assert_allclose(qdot_back, qdot)

    def test_shape_errors(self):
        """Mismatched or odd-length inputs are refused."""
        with pytest.raises(DynamicsError):
            dynamics.to_hamiltonian([1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(DynamicsError):
            dynamics.from_hamiltonian(np.zeros(5))

    def test_equilibrium_state_is_at_rest(self):
        """u0 = (−α q0, q0) has q̇ = 0."""
        _, qdot = dynamics.from_hamiltonian(dynamics.equilibrium_state([0.7, -0.2]))
        np.testing.assert_allclose(qdot, 0.0, atol=1e-15)

    def test_vector_field_vanishes_at_libration_points(self, equal_librations, equal_masses):
        """J H'(u0) = 0 at every libration point."""
        system = rt4bp.hamiltonian_system(equal_masses, dim=2)
        for lp in equal_librations:
            u0 = dynamics.equilibrium_state(lp.position)
            assert np.max(np.abs(dynamics.hamiltonian_vector_field(system, u0))) < 1e-10

    def test_invalid_dimension(self):
        """Systems live in the plane or in space."""
        with pytest.raises(DynamicsError):
            dynamics.HamiltonianSystem(
                dim=4, potential=lambda q: 0.0, gradient=lambda q: q, hessian=lambda q: np.eye(4)
            )


@pytest.mark.unit
class TestFlow:
    """Tests for the DOP853 flows."""

    def test_linear_flow_matches_matrix_exponential(self, elliptic_system):
        """The quadratic system flows by exp(T·J·A)."""
        u0 = np.array([0.1, -0.2, 0.3, 0.05])
        T = 7.3
        exact = expm(T * dynamics.jacobian(elliptic_system, np.zeros(4))) @ u0
        result = dynamics.flow(elliptic_system, u0, T)
        np.testing.assert_allclose(result.state, exact, atol=1e-9)

    def test_samples(self, elliptic_system):
        """samples=M gives M+1 uniformly spaced states."""
        result = dynamics.flow(elliptic_system, np.array([0.1, 0.0, 0.0, 0.1]), 2.0, samples=10)
        assert result.states.shape == (11, 4)
        np.testing.assert_allclose(result.times, np.linspace(0.0, 2.0, 11))

    def test_invalid_arguments(self, elliptic_system):
        """Non-positive durations and wrong state lengths are refused."""
        with pytest.raises(DynamicsError):
            dynamics.flow(elliptic_system, np.zeros(4), 0.0)
        with pytest.raises(DynamicsError):
            dynamics.flow(elliptic_system, np.zeros(6), 1.0)

    def test_energy_drift_far_from_primaries(self, equal_masses):
        """Relative energy drift stays below 1e-9 over 100 time units."""
        system = rt4bp.hamiltonian_system(equal_masses, dim=3)
        result = dynamics.flow(system, _circular_state(6.0), 100.0, rtol=1e-12, atol=1e-13)
        assert result.energy_drift < 1e-9

    def test_first_and_second_order_agree(self, equal_masses):
        """Both formulations give the same position after 10 time units."""
        system = rt4bp.hamiltonian_system(equal_masses, dim=3)
        u0 = _circular_state(5.5, z=0.3)
        q0, qdot0 = dynamics.from_hamiltonian(u0)
        first = dynamics.flow(system, u0, 10.0, rtol=1e-12, atol=1e-12)
        second = dynamics.flow_second_order(system, q0, qdot0, 10.0, rtol=1e-12, atol=1e-12)
        q_first = first.state[3:]
        q_second = second.state[:3]
        assert np.max(np.abs(q_first - q_second)) < 1e-9 * max(1.0, np.linalg.norm(q_first))

    def test_domain_exit_carries_time(self, pathological_system):
        """Escaping trajectories stop with the exit time."""
        u0 = dynamics.to_hamiltonian([2.0, 0.0], [2.0, 0.0])
        with pytest.raises(dynamics.DomainExitError) as excinfo:
            dynamics.flow(pathological_system, u0, 10.0)
        assert 0.0 < excinfo.value.exit_time < 10.0

    def test_primary_approach_is_a_domain_exit(self, equal_masses):
        """Heading straight at a primary triggers the boundary event."""
        system = rt4bp.hamiltonian_system(equal_masses, dim=2)
        u0 = dynamics.to_hamiltonian([0.9, 0.0], [0.0, 0.0])
        with pytest.raises(dynamics.DomainExitError):
            dynamics.flow(system, u0, 5.0)


@pytest.mark.unit
class TestShooting:
    """Tests for Newton shooting of closed orbits."""

    @pytest.mark.parametrize("which", [0, 1])
    def test_linear_system_both_periods(self, elliptic_system, elliptic_periods, which):
        """Shooting from a seed with a 1% period error recovers T- and T+."""
        T0 = elliptic_periods[which]
        seed = dynamics.linear_seed(elliptic_system, [0.0, 0.0], T0, amplitude=0.1)
        orbit = dynamics.shoot_periodic(elliptic_system, seed, 1.01 * T0)
        assert orbit.T == pytest.approx(T0, rel=1e-7)
        assert dynamics.verify_orbit(elliptic_system, orbit) < 1e-8
        assert orbit.loop.shape == (65, 2)

    def test_linear_seed_amplitude(self, elliptic_system, elliptic_periods):
        """The seed is displaced by the requested amplitude in q."""
        seed = dynamics.linear_seed(elliptic_system, [0.0, 0.0], elliptic_periods[0], amplitude=0.2)
        assert np.linalg.norm(seed[2:]) == pytest.approx(0.2)

    def test_vertical_orbit_at_center(self, equal_masses, vertical_period):
        """The small vertical orbit at the center has period 2π/√(3√3)."""
        system = rt4bp.hamiltonian_system(equal_masses, dim=3)
        seed = dynamics.linear_seed(system, np.zeros(3), vertical_period)
        orbit = dynamics.shoot_periodic(system, seed, vertical_period)
        assert orbit.T == pytest.approx(vertical_period, rel=1e-5)
        assert orbit.max_abs_z() > 0.5 * orbit.amplitude((0.0, 0.0))

    def test_phi_map(self, elliptic_system, elliptic_periods):
        """Φ keeps q̄ and recovers p̄ = q̇ − α q̄ along the loop."""
        T0 = elliptic_periods[0]
        seed = dynamics.linear_seed(elliptic_system, [0.0, 0.0], T0, amplitude=0.1)
        orbit = dynamics.shoot_periodic(elliptic_system, seed, T0)
        image = dynamics.phi_map(elliptic_system, orbit)
        states = dynamics.flow(elliptic_system, orbit.initial_state, orbit.T, samples=64).states
        assert image.T == orbit.T
        np.testing.assert_allclose(image.q, orbit.loop, atol=1e-12)
        np.testing.assert_allclose(image.p, states[:, :2], atol=1e-10)

    @pytest.mark.slow
    def test_pathological_system_has_no_orbits(self, pathological_system, rng):
        """Every seed fails: the equilibrium is the only periodic solution."""
        for _ in range(100):
            q = rng.uniform(-0.5, 0.5, size=2)
            qdot = rng.uniform(-0.5, 0.5, size=2)
            seed = dynamics.to_hamiltonian(q, qdot)
            with pytest.raises(ShootingError, match="no orbit found"):
                dynamics.shoot_periodic(pathological_system, seed, 2 * math.pi)

    @pytest.mark.slow
    def test_sector_point_planar_orbit(self, equal_librations, equal_masses):
        """A planar orbit emanates from a sector saddle at T-."""
        lp = next(lp for lp in equal_librations if lp.region_tag == "D1")
        T0 = lp.report.T_minus
        system = rt4bp.hamiltonian_system(equal_masses, dim=2)
        orbit = dynamics.shoot_periodic(system, dynamics.linear_seed(system, lp.position, T0), T0)
        assert orbit.T == pytest.approx(T0, rel=1e-4)
        assert dynamics.verify_orbit(system, orbit) < 1e-8


@pytest.mark.unit
class TestRadialConvexity:
    """Tests for the convexity of |q|²/2 along the pathological system."""

    def test_identity_with_acceleration(self, pathological_system, rng):
        """(ẋ + y)² + (ẏ − x)² + |q|⁴ equals |q̇|² + q·q̈."""
        a = dynamics.alpha(2)
        for _ in range(10):
            q0 = rng.uniform(-0.3, 0.3, size=2)
            qdot0 = rng.uniform(-0.3, 0.3, size=2)
            result = dynamics.flow_second_order(pathological_system, q0, qdot0, 1.0, samples=20)
            q, qdot = result.states[:, :2], result.states[:, 2:]
            qddot = qdot @ (2.0 * a).T - np.array([pathological_system.gradient(p) for p in q])
            expected = np.sum(qdot * qdot, axis=1) + np.sum(q * qddot, axis=1)
            values = dynamics.radial_convexity(q, qdot)
            np.testing.assert_allclose(values, expected, rtol=1e-10, atol=1e-14)
            assert np.all(values[np.linalg.norm(result.states, axis=1) > 0] > 0)

    def test_single_point(self):
        """Scalars in, scalar out."""
        assert float(dynamics.radial_convexity([1.0, 0.0], [0.0, 1.0])) == pytest.approx(1.0)


@pytest.mark.unit
class TestBranchStatus:
    """Tests for the terminal classification of stored branches."""

    def _branch(self, *orbits, equilibrium=(0.0, 0.0), period=1.0) -> Branch:
        return Branch(origin=BranchOrigin(period, equilibrium, 1), orbits=list(orbits))

    def test_budget_exhausted(self, elliptic_system):
        """A bounded branch far from everything ran out of steps."""
        status, evidence = dynamics.branch_status(
            self._branch(_synthetic_orbit(1.0, 0.1), _synthetic_orbit(1.1, 0.5)), elliptic_system
        )
        assert status == BranchStatus.BUDGET_EXHAUSTED
        assert evidence["max_amplitude"] == pytest.approx(0.5)
        assert evidence["sup_norm"] == pytest.approx(1.1)
        assert evidence["blue_sky_candidate"] is False

    def test_unbounded_amplitude(self, elliptic_system):
        """Amplitude beyond the bound."""
        status, evidence = dynamics.branch_status(
            self._branch(_synthetic_orbit(2.0, 6.0)), elliptic_system
        )
        assert status == BranchStatus.UNBOUNDED
        assert evidence["offending_norm"] == pytest.approx(6.0)
        assert "flag" not in evidence

    def test_blue_sky(self, elliptic_system):
        """Period beyond the bound at small amplitude is flagged."""
        status, evidence = dynamics.branch_status(
            self._branch(_synthetic_orbit(150.0, 1.0)), elliptic_system
        )
        assert status == BranchStatus.UNBOUNDED
        assert evidence["blue_sky_candidate"] is True
        assert "blue-sky" in evidence["flag"]

    def test_reaches_primary(self, equal_masses):
        """A loop passing within 1e-3 of a primary."""
        system = rt4bp.hamiltonian_system(equal_masses, dim=2)
        status, evidence = dynamics.branch_status(
            self._branch(_synthetic_orbit(3.0, 0.9995)), system
        )
        assert status == BranchStatus.REACHES_BOUNDARY
        assert evidence["min_boundary_distance"] < 1e-3

    def test_recorded_domain_exit(self, elliptic_system):
        """A domain exit during continuation counts as reaching the boundary."""
        branch = self._branch(_synthetic_orbit(1.0, 0.5))
        branch.evidence["domain_exit_time"] = 4.2
        status, _ = dynamics.branch_status(branch, elliptic_system)
        assert status == BranchStatus.REACHES_BOUNDARY

    def test_compact_at_other_equilibrium(self, elliptic_system):
        """Shrinking onto a second equilibrium closes the branch."""
        system = dataclasses.replace(elliptic_system, equilibria=((0.0, 0.0), (3.0, 0.0)))
        branch = self._branch(_synthetic_orbit(1.0, 0.5), _synthetic_orbit(2.0, 1e-8, (3.0, 0.0)))
        status, evidence = dynamics.branch_status(branch, system)
        assert status == BranchStatus.COMPACT_TWO_TRIVIAL
        assert evidence["trivial_proximity"] == [{"step": 1, "T": 2.0, "equilibrium": [3.0, 0.0]}]

    def test_compact_at_origin_other_period(self, elliptic_system):
        """Returning to the origin at a different period also closes the branch."""
        branch = self._branch(_synthetic_orbit(1.0, 0.5), _synthetic_orbit(2.5, 1e-8))
        status, _ = dynamics.branch_status(branch, elliptic_system)
        assert status == BranchStatus.COMPACT_TWO_TRIVIAL

    def test_origin_at_own_period_is_not_compact(self, elliptic_system):
        """Tiny orbits near (T0, q0) are the start of the branch."""
        branch = self._branch(_synthetic_orbit(1.0, 1e-8), _synthetic_orbit(1.0, 0.5))
        status, evidence = dynamics.branch_status(branch, elliptic_system)
        assert status == BranchStatus.BUDGET_EXHAUSTED
        assert evidence["trivial_proximity"] == []

    def test_reconcile_records_disagreement(self, elliptic_system, caplog):
        """A stored status the orbits do not support is kept, flagged and logged."""
        branch = self._branch(_synthetic_orbit(1.0, 0.1), _synthetic_orbit(1.1, 0.5))
        branch.status = BranchStatus.UNBOUNDED
        with caplog.at_level("WARNING", logger="coriolis_branches.dynamics"):
            dynamics._reconcile_status(branch, elliptic_system)
        assert branch.status == BranchStatus.UNBOUNDED
        assert branch.evidence["rederived_status"] == "budget_exhausted"
        assert branch.evidence["max_amplitude"] == pytest.approx(0.5)
        assert "budget_exhausted" in caplog.text

    def test_reconcile_agreement_is_silent(self, elliptic_system, caplog):
        """Matching statuses only merge the evidence."""
        branch = self._branch(_synthetic_orbit(2.0, 6.0))
        branch.status = BranchStatus.UNBOUNDED
        with caplog.at_level("WARNING", logger="coriolis_branches.dynamics"):
            dynamics._reconcile_status(branch, elliptic_system)
        assert "rederived_status" not in branch.evidence
        assert branch.evidence["offending_norm"] == pytest.approx(6.0)
        assert caplog.text == ""

    def test_empty_branch(self, elliptic_system):
        """No orbits, no status."""
        with pytest.raises(DynamicsError):
            dynamics.branch_status(self._branch(), elliptic_system)


@pytest.mark.integration
class TestContinuation:
    """Tests for pseudo-arclength continuation."""

    def test_zero_gamma_refused(self, elliptic_system, elliptic_periods):
        """Nothing is continued from a trivial orbit with γ = 0."""
        origin = BranchOrigin(elliptic_periods[0], (0.0, 0.0), 0)
        with pytest.raises(DynamicsError, match="vanishes"):
            dynamics.continue_branch(elliptic_system, origin)

    def test_linear_family(self, elliptic_system, elliptic_periods):
        """The linear family keeps its period while the amplitude grows."""
        T0 = elliptic_periods[0]
        branch = dynamics.continue_branch(
            elliptic_system, BranchOrigin(T0, (0.0, 0.0), 1), max_steps=8, progress=False
        )
        assert len(branch.orbits) == 9
        assert branch.status == BranchStatus.BUDGET_EXHAUSTED
        np.testing.assert_allclose(branch.periods(), T0, rtol=1e-7)
        assert np.all(np.diff(branch.amplitudes()) > 0)
        assert len(branch.to_rows()) == 9

    @pytest.mark.slow
    def test_vertical_family_at_center(self, equal_masses, vertical_period):
        """The vertical family at the center stays on the z axis with T → T0 as a → 0."""
        system = rt4bp.hamiltonian_system(equal_masses, dim=3)
        branch = dynamics.continue_branch(
            system, BranchOrigin(vertical_period, (0.0, 0.0), 1), max_steps=25, progress=False
        )
        assert len(branch.orbits) >= 20
        assert all(orbit.closure_residual < 1e-8 for orbit in branch.orbits)

        amplitudes = branch.amplitudes()
        assert np.all(np.diff(amplitudes) > 0)
        for orbit in branch.orbits:
            assert orbit.max_abs_z() > 0.5 * orbit.amplitude((0.0, 0.0))

        small = amplitudes < 0.2
        assert small.sum() >= 3
        slope, intercept = np.polyfit(amplitudes[small] ** 2, branch.periods()[small], 1)
        assert intercept == pytest.approx(vertical_period, abs=1e-3)

    def test_failed_branch_comes_back_empty(self, elliptic_system, mocker):
        """continue_all records a failed start instead of raising."""
        mocker.patch.object(
            dynamics, "continue_branch", side_effect=ShootingError("no orbit found: stub")
        )
        origins = [BranchOrigin(1.0, (0.0, 0.0), 1), BranchOrigin(2.0, (0.0, 0.0), -1)]
        branches = dynamics.continue_all(elliptic_system, origins, max_workers=2)
        assert [b.origin for b in branches] == origins
        assert all(b.orbits == [] for b in branches)
        assert all("no orbit found" in b.evidence["error"] for b in branches)
