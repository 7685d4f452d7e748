"""
Runtime configuration for the observability toolkit.

Defaults live here as module constants; a few can be overridden through
environment variables, read at call time so tests and long-running
servers pick up changes.

Environment:
- OBSVKIT_TOL: relative rank tolerance (threshold = OBSVKIT_TOL * largest singular value)
- OBSVKIT_LOG_LEVEL: logging level name, default WARNING
- PORT: port of the HTTP API, default 5000
"""

import logging
import os
import sys
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

# Numerical defaults
DEFAULT_CLUSTER_TOL_FACTOR = 1e-8
DEFAULT_VERIFY_TOL = 1e-8
DEFAULT_ROWSPACE_RESIDUAL = 1e-9
DEFAULT_IMAG_RESIDUE = 1e-10
DEFAULT_ORTHONORMAL_TOL = 1e-8

# Sampling design defaults
DEFAULT_DISCRETE_RETRIES = 8
DEFAULT_CONTINUOUS_RETRIES = 3
DEFAULT_Q_REDRAWS = 8
DEFAULT_S_MAX_FACTOR = 4
DEFAULT_MAX_STEP = 6

# Estimation defaults
DEFAULT_NOISE_BOUND = 0.0
DEFAULT_HORIZON = 40
DEFAULT_SEED = 0

# API defaults
DEFAULT_PORT = 5000

# Ingestion limits
MAX_STATE_DIMENSION = 200
MAX_SAMPLES = 10000

_LOGGING_CONFIGURED = False


def rank_rtol_override() -> Optional[float]:
    """
    Relative rank tolerance from OBSVKIT_TOL, or None when unset or invalid.
    """
    raw = os.environ.get("OBSVKIT_TOL")
    if raw is None or raw.strip() == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        logger.warning("Ignoring OBSVKIT_TOL=%r: not a number", raw)
        return None
    if not value > 0 or value != value or value == float("inf"):
        logger.warning("Ignoring OBSVKIT_TOL=%r: must be a positive finite number", raw)
        return None
    return value


def default_s_max(n: int) -> int:
    """Pathological-period scan length for an n-dimensional design pair."""
    return max(1, DEFAULT_S_MAX_FACTOR * n * n)


def default_initial_state(n: int) -> np.ndarray:
    """Unit-norm all-equal initial state, ones(n) / sqrt(n)."""
    return np.ones(n) / np.sqrt(n) if n else np.zeros(0)


def api_port() -> int:
    return int(os.environ.get("PORT", DEFAULT_PORT))


def configure_logging(level: Optional[str] = None) -> None:
    """Install a single stderr handler on the root logger."""
    global _LOGGING_CONFIGURED
    level_name = (level or os.environ.get("OBSVKIT_LOG_LEVEL", "WARNING")).upper()
    numeric = getattr(logging, level_name, logging.WARNING)
    if not _LOGGING_CONFIGURED:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        logging.getLogger().addHandler(handler)
        _LOGGING_CONFIGURED = True
    logging.getLogger().setLevel(numeric)
