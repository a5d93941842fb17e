"""
Configuration module for FlowLoc
Manages numerical tolerances, suite defaults, and application settings
"""

import logging
import os

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


# Application Settings
APP_NAME = "FlowLoc"
APP_VERSION = "1.0.0"
LOG_LEVEL = os.getenv("FLOWLOC_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Bound-check tolerances (looser than the linear-algebra residuals)
REL_TOL = _env_float("FLOWLOC_REL_TOL", 1e-9)
ABS_TOL = _env_float("FLOWLOC_ABS_TOL", 1e-8)

# Graph construction
CONDUCTANCE_MIN = 1e-12
CONDUCTANCE_MAX = 1e12
DEFAULT_CONDUCTANCE = 1.0

# Linear algebra contracts
KERNEL_THRESHOLD = 1e-12          # relative to the largest eigenvalue
EIG_RESIDUAL_TOL = 1e-10          # times max(1, lambda_n)
ORTHONORMALITY_TOL = 1e-10
SYMMETRY_TOL = 1e-12
BALANCE_TOL = 1e-12
POWER_ITERATION_TOL = 1e-11
POWER_ITERATION_MAX_ITER = 10**6

# Quadrature
PANELS_PER_DECADE = 64
DISSIPATION_HEAD_FACTOR = 1e-4    # s_min = factor / lambda_n
DISSIPATION_FLOOR_FACTOR = 1e-12  # head grid starts at factor / lambda_n
DISSIPATION_HORIZON_FACTOR = 40.0  # S = factor / lambda_2
HEAT_VARIATION_REL_TOL = 1e-6

# Graph families
FAMILIES = [
    "path", "cycle", "complete", "star", "grid2d",
    "hypercube", "gnp", "parallel_gadget", "random_weighted",
]
DEFAULT_SUITE_FAMILIES = ["path", "cycle", "complete", "star", "grid2d", "hypercube", "gnp"]
DEFAULT_SIZES = [4, 5, 6, 8, 12, 16, 24, 32, 48, 64]
CONDUCTANCE_MODES = ["unit", "weighted"]
WEIGHTED_LOG10_RANGE = (-3.0, 3.0)  # log-uniform conductances in [1e-3, 1e3]
GNP_DEFAULT_P = 0.3
GNP_MAX_RETRIES = 100
DEFAULT_SEED = _env_int("FLOWLOC_SEED", 7)

# Parallel-edge gadget (desk-scale proxy for the sqrt(m) limit)
GADGET_FACTOR = 0.9
GADGET_BIG_PER_EDGE = 100.0       # gadget check runs once big >= 100 * m
GADGET_DEFAULT_SIZES = [4, 9, 16]

# Suite cost gates
QUADRATURE_MAX_N = _env_int("FLOWLOC_QUADRATURE_MAX_N", 32)
HEAT_VARIATION_MAX_EDGES = _env_int("FLOWLOC_HEAT_VARIATION_MAX_EDGES", 256)
LOG_MEAN_SANDWICH_PAIRS = 10_000
DEFAULT_JOBS = _env_int("FLOWLOC_JOBS", 1)

# Decomposition cache
CACHE_MAX_ENTRIES = _env_int("FLOWLOC_CACHE_MAX_ENTRIES", 64)

# Checks understood by the suite runner
CHECKS = [
    "quadratic_form",
    "spectral_weighted",
    "unweighted_bounds",
    "theorem_consistency",
    "projection",
    "oracle_equivalence",
    "green_integral",
    "entropy_dissipation",
    "log_mean_cs",
    "heat_variation",
    "log_mean_sandwich",
    "parallel_gadget",
]

# Quantities understood by `compute`
QUANTITIES = ["K", "Pi", "Kbar_norm", "Pibar_norm", "avg_l1", "eff_res", "entropy_mu"]
MATRIX_QUANTITIES = {"K", "Pi"}

# Output
OUTPUT_FORMATS = ["json", "csv", "table"]
FLOAT_FORMAT = "%.17g"

# CORS Settings for the HTTP surface
CORS_ORIGINS = [
    "http://localhost:3000",
    "http://localhost:5173",
    "http://localhost:8000",
    "http://127.0.0.1:8000",
]


def configure_logging(level: str = LOG_LEVEL) -> None:
    """Apply the application log format; called by entry points only"""
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)


def validate_check_name(name: str) -> bool:
    """
    Validate if a check name is known to the suite runner

    Args:
        name: Check name to validate

    Returns:
        bool: True if the check is supported, False otherwise
    """
    return name.strip().lower() in CHECKS


def validate_family(name: str) -> bool:
    """
    Validate if a graph family is supported by the generator

    Args:
        name: Family name

    Returns:
        bool: True if the family is supported, False otherwise
    """
    return name.strip().lower() in FAMILIES
