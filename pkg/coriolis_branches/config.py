# Configuration for the coriolis-branches toolkit

import sys
from pathlib import Path
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


# Load environment variables from a .env file if one exists
load_dotenv()


class AppSettings(BaseSettings):
    """
    Application settings, validated with Pydantic.
    Reads environment variables and applies default values.
    """

    model_config = SettingsConfigDict(case_sensitive=False, extra="ignore")

    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="INFO",
        description="Logging level",
    )
    OUTPUT_DIR: Path = Field(
        default=Path("output_branches/"),
        description="Directory for branch CSV files",
    )
    THREAD_COUNT: int = Field(
        default=1,
        ge=1,
        description="Worker threads for independent region and continuation jobs",
    )

    # ========== LINEAR ALGEBRA ==========

    SINGULAR_TOL: float = Field(
        default=1e-12,
        gt=0,
        description="sigma_min <= tol * sigma_max declares a crossing",
    )
    DEGUA_ZERO_TOL: float = Field(
        default=0.0,
        ge=0,
        description="Relative cutoff for deleting coefficients before counting sign changes (0 deletes exact zeros only)",
    )
    COMMUTE_TOL: float = Field(
        default=1e-10,
        gt=0,
        description="Commutator norm accepted by the block determinant reduction",
    )

    # ========== CLASSIFICATION ==========

    BOUNDARY_TOL: float = Field(
        default=1e-12,
        gt=0,
        description="Absolute band on the region-defining inequalities",
    )
    PERIOD_MATCH_RTOL: float = Field(
        default=1e-9,
        gt=0,
        description="Relative tolerance when matching T against T-, T+ or 2pi/sqrt(beta3)",
    )
    JUMP_EPS_REL: float = Field(
        default=1e-4,
        gt=0,
        description="One-sided offset (relative to T) for Morse index jumps",
    )

    # ========== DEGREE / LIBRATION POINTS ==========

    DEGREE_EPSILON: float = Field(
        default=0.05,
        gt=0,
        description="Inward offset of region boundaries for degree computation",
    )
    NEWTON_GRID_SPACING: float = Field(
        default=0.02,
        gt=0,
        description="Seed grid spacing for libration point search",
    )
    NEWTON_MAX_ITER: int = Field(default=50, ge=1, description="Newton iterations per seed")
    NEWTON_DAMPING: float = Field(
        default=0.5,
        gt=0,
        le=1,
        description="Step factor applied when |grad V| increases",
    )
    DEDUP_RADIUS: float = Field(default=1e-7, gt=0, description="Point deduplication radius")
    GRAD_TOL: float = Field(default=1e-11, gt=0, description="Accepted |grad V| at a libration point")
    DEGENERATE_DET_TOL: float = Field(
        default=1e-8,
        gt=0,
        description="|det V''| below this switches the Brouwer index to a degree computation",
    )
    INDEX_RADIUS: float = Field(default=0.05, gt=0, description="Circle radius for Brouwer indices")

    # ========== DYNAMICS ==========

    INTEGRATOR_RTOL: float = Field(default=1e-11, gt=0, description="DOP853 relative tolerance")
    INTEGRATOR_ATOL: float = Field(default=1e-12, gt=0, description="DOP853 absolute tolerance")
    ENERGY_TOL: float = Field(
        default=1e-9,
        gt=0,
        description="Relative energy drift tolerated along integrated trajectories",
    )
    SHOOTING_TOL: float = Field(default=1e-9, gt=0, description="Shooting residual tolerance")
    SHOOTING_MAX_ITER: int = Field(default=30, ge=1, description="Shooting Newton iterations")
    CLOSURE_TOL: float = Field(default=1e-8, gt=0, description="Loop closure tolerance")
    LOOP_SAMPLES: int = Field(default=64, ge=8, description="Samples per closed loop")
    SEED_AMPLITUDE: float = Field(
        default=1e-3,
        gt=0,
        description="Amplitude of the linear seed used to leave a trivial orbit",
    )

    # ========== CONTINUATION ==========

    CONT_MAX_STEPS: int = Field(default=40, ge=1, description="Continuation step budget")
    CONT_MIN_STEP: float = Field(default=1e-5, gt=0, description="Smallest arclength step")
    CONT_MAX_STEP: float = Field(default=0.1, gt=0, description="Largest arclength step")
    CONT_INITIAL_STEP: float = Field(default=1e-3, gt=0, description="First arclength step")
    AMPLITUDE_BOUND: float = Field(default=5.0, gt=0, description="Amplitude marking 'unbounded'")
    PERIOD_BOUND: float = Field(default=100.0, gt=0, description="Period marking 'unbounded'")
    MIN_PRIMARY_DISTANCE: float = Field(
        default=1e-3,
        gt=0,
        description="Distance to the boundary of the domain marking 'reaches_boundary'",
    )
    TRIVIAL_RADIUS: float = Field(
        default=1e-6,
        gt=0,
        description="Loop radius around an equilibrium counted as a trivial orbit",
    )


class RunConfig(BaseModel):
    """Validated parameters of a single CLI run."""

    command: Literal["classify", "rt4bp", "degree"]
    masses: tuple[float, float, float] | None = None
    beta1: float | None = None
    beta2: float | None = None
    beta3: float | None = Field(default=None, gt=0)
    ib: int | None = Field(default=None, ge=-1, le=1)
    extremum: bool = False
    even: bool = False
    region: str | None = None
    epsilon: float = Field(default=0.05, gt=0)
    continue_branches: bool = False
    max_steps: int = Field(default=40, ge=1)
    output_dir: Path = Path("output_branches/")
    threads: int = Field(default=1, ge=1)

    @field_validator("masses")
    @classmethod
    def _check_masses(cls, v: tuple[float, float, float] | None):
        if v is not None:
            from coriolis_branches.rt4bp import MassTriple

            MassTriple(*v)
        return v


def load_settings(env_file: Path | None = None) -> AppSettings:
    """Build settings, optionally layering a key=value file over the defaults."""
    if env_file is None:
        return AppSettings()
    if not env_file.exists():
        raise FileNotFoundError(f"Config file not found: {env_file}")
    return AppSettings(_env_file=env_file)


# Global validated settings instance
try:
    settings = AppSettings()
except Exception as e:
    sys.stderr.write(f"CRITICAL: Error loading or validating configuration: {e}\n")
    sys.exit(1)
