"""
Pytest configuration and shared fixtures for coriolis-branches tests.

This file contains common fixtures and configuration used across all tests.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from coriolis_branches import config, dynamics, rt4bp


# ============================================================================
# Fixture: Temporary Directories
# ============================================================================


@pytest.fixture
def temp_output_dir(tmp_path) -> Path:
    """
    Provide a temporary directory for branch CSV files.
    """
    output_dir = tmp_path / "test_output"
    output_dir.mkdir(exist_ok=True)
    yield output_dir


# ============================================================================
# Fixture: Random Numbers
# ============================================================================


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so randomized checks are reproducible."""
    return np.random.default_rng(20240611)


# ============================================================================
# Fixture: Mass Triples
# ============================================================================


@pytest.fixture
def equal_masses() -> rt4bp.MassTriple:
    """m1 = m2 = m3 = √3."""
    return rt4bp.MassTriple.equal()


@pytest.fixture
def unequal_masses() -> rt4bp.MassTriple:
    """A visibly unequal triple, rescaled to the normalized total."""
    return rt4bp.MassTriple.normalized(1.2, 1.0, 0.8)


@pytest.fixture(scope="session")
def equal_librations() -> list[rt4bp.LibrationPoint]:
    """
    Libration points for equal masses.

    Session scoped: the Newton search runs once for the whole test session.
    """
    return rt4bp.find_librations(rt4bp.MassTriple.equal())


@pytest.fixture(scope="session")
def equal_report() -> rt4bp.RT4BPReport:
    """Full analysis (points, degrees, claims) for equal masses."""
    return rt4bp.analyze(rt4bp.MassTriple.equal(), max_workers=1)


# ============================================================================
# Fixture: Reference Systems
# ============================================================================


@pytest.fixture
def elliptic_system() -> dynamics.HamiltonianSystem:
    """Quadratic system with β1 = β2 = 1 (region R1, two imaginary pairs)."""
    return dynamics.quadratic_system(1.0, 1.0)


@pytest.fixture
def elliptic_periods() -> tuple[float, float]:
    """Closed-form (T-, T+) for β1 = β2 = 1."""
    return 2 * math.pi / (1 + math.sqrt(2)), 2 * math.pi / (math.sqrt(2) - 1)


@pytest.fixture
def pathological_system() -> dynamics.HamiltonianSystem:
    """Planar system on the boundary of R0 whose only closed orbit is the equilibrium."""
    return dynamics.pathological_system()


@pytest.fixture
def vertical_period() -> float:
    """2π/√β3 at the center of the equal-mass triangle, β3 = 3√3."""
    return 2 * math.pi / math.sqrt(3 * math.sqrt(3))


# ============================================================================
# Fixture: Mock Environment Variables
# ============================================================================


@pytest.fixture
def mock_env_vars(monkeypatch):
    """
    Mock environment variables for testing configuration.

    Usage:
        def test_config(mock_env_vars):
            mock_env_vars({'DEGREE_EPSILON': '0.1'})
    """

    def _set_env_vars(env_dict: dict[str, str]):
        for key, value in env_dict.items():
            monkeypatch.setenv(key, value)

    return _set_env_vars


# ============================================================================
# Fixture: Clean Test Environment
# ============================================================================


@pytest.fixture(autouse=True)
def clean_test_env(tmp_path, monkeypatch):
    """
    Automatically clean test environment for each test.

    This fixture runs automatically for all tests (autouse=True). The global
    settings are rebuilt so nothing a test (or a --config run) changes leaks out.
    """
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "output"))
    monkeypatch.setenv("LOG_LEVEL", "INFO")
    monkeypatch.setattr(config, "settings", config.AppSettings())

    yield

    # Cleanup is handled by tmp_path and monkeypatch automatically


# ============================================================================
# Helper Functions
# ============================================================================


def circle_loop(center, radius: float, samples: int = 16, dim: int = 2) -> np.ndarray:
    """
    Closed loop of samples+1 points on a circle in the xy plane.

    Args:
        center: Circle center (dim coordinates)
        radius: Circle radius
        samples: Number of distinct samples
        dim: Ambient dimension
    """
    theta = np.linspace(0.0, 2 * math.pi, samples + 1)
    loop = np.zeros((samples + 1, dim))
    loop[:, 0] = radius * np.cos(theta)
    loop[:, 1] = radius * np.sin(theta)
    return loop + np.asarray(center, dtype=float)


def random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    """Dense random symmetric matrix with N(0, 1) entries."""
    a = rng.normal(size=(n, n))
    return (a + a.T) / 2
