"""
Error types for the observability toolkit.

Input problems derive from ValueError and operational failures from
RuntimeError, so callers that already catch the builtins keep working.
Every class also derives from ObsvkitError for blanket handling in the
CLI and HTTP layers.
"""

from typing import Any, Dict, List, Optional


class ObsvkitError(Exception):
    """Base class for all toolkit errors."""


# ---------------------------------------------------------------------------
# Input errors
# ---------------------------------------------------------------------------

class InvalidMatrix(ObsvkitError, ValueError):
    """Matrix has non-finite entries or incompatible dimensions."""


class InvalidBasis(ObsvkitError, ValueError):
    """Columns of a supposed basis are not orthonormal."""


class InvalidExponent(ObsvkitError, ValueError):
    """Matrix power requested with a negative or non-integer exponent."""


class SchemaError(ObsvkitError, ValueError):
    """A system or sampling document does not match the schema."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DomainMismatch(ObsvkitError, ValueError):
    """Sampling sequence and system live in different time domains."""


class MissingFunctional(ObsvkitError, ValueError):
    """An analysis needs the functional output matrix F but none was given."""


class InvalidQ(ObsvkitError, ValueError):
    """Structured Q does not match the Jordan block layout."""


class UnsupportedStructure(ObsvkitError, ValueError):
    """Spectrum has several Jordan blocks for one eigenvalue."""


class NotObservable(ObsvkitError, ValueError):
    """Operation requires an observable pair."""


# ---------------------------------------------------------------------------
# Operational errors
# ---------------------------------------------------------------------------

class RankDeficientRegressor(ObsvkitError, RuntimeError):
    """Least-squares regressor lacks full column rank."""

    def __init__(self, message: str, rank_result: Any = None, window: Optional[List[float]] = None):
        self.rank_result = rank_result
        self.window = window
        super().__init__(message)


class DesignFailure(ObsvkitError, RuntimeError):
    """No certified sampling design was found."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class MissingCertificate(ObsvkitError, RuntimeError):
    """A relaxed design or reduced estimator was requested without a certificate."""


class NumericalInconsistency(ObsvkitError, RuntimeError):
    """Two tests that must agree mathematically disagree numerically."""
