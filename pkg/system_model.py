"""
System and Sampling Data Model

Validated value types for linear time-invariant systems
x+ = Ax + Bu, y = Cx + Du, z = Fx and for measurement schedules, plus their
JSON ingestion and serialisation.

Key Features:
- Immutable LtiSystem / SamplingSequence with construction-time validation
- JSON schema checks that name the offending field path
- Missing B and D default to zero-width blocks; F is optional
- Exact round trip through serialize_system / serialize_sampling
"""

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import obsvkit_config as config
from obsvkit_errors import DomainMismatch, InvalidMatrix, MissingFunctional, SchemaError

logger = logging.getLogger(__name__)

SYSTEM_KEYS = {"domain", "A", "B", "C", "D", "F", "name", "description"}
SAMPLING_KEYS = {"times", "domain", "certificate", "target", "designed_on", "k", "k_star", "name",
                 "strategy", "seed", "validation", "diagnostics"}

Document = Union[str, bytes, Dict[str, Any]]


class TimeDomain(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"

    @classmethod
    def from_value(cls, value: Any, path: str = "domain") -> "TimeDomain":
        if isinstance(value, TimeDomain):
            return value
        try:
            return cls(value)
        except ValueError:
            raise SchemaError(f"must be 'discrete' or 'continuous', got {value!r}", path)


def _frozen(M: np.ndarray) -> np.ndarray:
    M = np.array(M, dtype=float)
    M.setflags(write=False)
    return M


@dataclass(frozen=True)
class LtiSystem:
    """
    Quintuple (A, B, C, D, F) with its time domain.

    B and D have m = 0 columns when the system has no inputs. F is None
    when no functional output was supplied.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    F: Optional[np.ndarray]
    domain: TimeDomain

    def __post_init__(self):
        A, C = np.asarray(self.A, dtype=float), np.asarray(self.C, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise InvalidMatrix(f"A must be square with n >= 1, got shape {A.shape}")
        n = A.shape[0]
        if C.ndim != 2 or C.shape[1] != n or C.shape[0] < 1:
            raise InvalidMatrix(f"C must be q x {n} with q >= 1, got shape {C.shape}")
        B = np.asarray(self.B, dtype=float).reshape(n, -1) if np.asarray(self.B).size else np.zeros((n, 0))
        m = B.shape[1]
        D = np.asarray(self.D, dtype=float) if np.asarray(self.D).size else np.zeros((C.shape[0], m))
        if D.shape != (C.shape[0], m):
            raise InvalidMatrix(f"D must be {C.shape[0]} x {m}, got shape {D.shape}")
        F = None
        if self.F is not None:
            F = np.asarray(self.F, dtype=float)
            if F.ndim == 1:
                F = F.reshape(1, -1)
            if F.ndim != 2 or F.shape[1] != n or F.shape[0] < 1:
                raise InvalidMatrix(f"F must be r x {n} with r >= 1, got shape {F.shape}")
        for name, M in (("A", A), ("B", B), ("C", C), ("D", D), ("F", F)):
            if M is not None and M.size and not np.all(np.isfinite(M)):
                raise InvalidMatrix(f"{name}: entries must be finite")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "D", _frozen(D))
        object.__setattr__(self, "F", None if F is None else _frozen(F))
        object.__setattr__(self, "domain", TimeDomain.from_value(self.domain))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    @property
    def r(self) -> int:
        return 0 if self.F is None else self.F.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.domain is TimeDomain.DISCRETE

    @property
    def has_inputs(self) -> bool:
        return self.m > 0 and bool(np.any(self.B))

    def require_F(self, F: Optional[np.ndarray] = None) -> np.ndarray:
        """Return the explicit F, else the system's own, else raise MissingFunctional."""
        if F is not None:
            F = np.atleast_2d(np.asarray(F, dtype=float))
            if F.shape[1] != self.n:
                raise InvalidMatrix(f"F must have {self.n} columns, got {F.shape[1]}")
            return F
        if self.F is None:
            raise MissingFunctional("this analysis needs a functional output matrix F")
        return self.F

    def with_F(self, F: Optional[np.ndarray]) -> "LtiSystem":
        return LtiSystem(self.A, self.B, self.C, self.D, F, self.domain)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LtiSystem):
            return NotImplemented
        same_f = (self.F is None and other.F is None) or (
            self.F is not None and other.F is not None and np.array_equal(self.F, other.F))
        return (self.domain is other.domain and same_f
                and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in "ABCD"))

    __hash__ = None


@dataclass(frozen=True)
class SamplingSequence:
    """Strictly increasing measurement instants in one time domain."""

    times: Tuple[Union[int, float], ...]
    domain: TimeDomain

    def __post_init__(self):
        domain = TimeDomain.from_value(self.domain)
        times = _validate_times(list(self.times), domain, "times")
        object.__setattr__(self, "times", tuple(times))
        object.__setattr__(self, "domain", domain)

    @property
    def k(self) -> int:
        return len(self.times)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    def window(self, start: int, count: int) -> "SamplingSequence":
        """Sub-sequence of count consecutive samples starting at index start."""
        if start < 0 or count < 1 or start + count > self.k:
            raise ValueError(f"window [{start}, {start + count}) outside a sequence of {self.k} samples")
        return SamplingSequence(self.times[start:start + count], self.domain)

    def __len__(self) -> int:
        return self.k


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------

def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, (bool, np.bool_))


def _validate_times(times: List[Any], domain: TimeDomain, path: str) -> List[Union[int, float]]:
    if not times:
        raise SchemaError("must contain at least one sampling instant", path)
    if len(times) > config.MAX_SAMPLES:
        raise SchemaError(f"more than {config.MAX_SAMPLES} sampling instants", path)
    out: List[Union[int, float]] = []
    for i, t in enumerate(times):
        where = f"{path}[{i}]"
        if not _is_number(t):
            raise SchemaError(f"must be a number, got {t!r}", where)
        t = float(t)
        if not math.isfinite(t):
            raise SchemaError("must be finite", where)
        if t < 0:
            raise SchemaError(f"must be non-negative, got {t}", where)
        if domain is TimeDomain.DISCRETE:
            if t != int(t):
                raise SchemaError(f"discrete-time instants must be integers, got {t}", where)
            t = int(t)
        if out and not t > out[-1]:
            raise SchemaError(f"instants must be strictly increasing ({out[-1]} then {t})", where)
        out.append(t)
    return out


def _parse_matrix(value: Any, path: str, rows: Optional[int] = None,
                  cols: Optional[int] = None) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SchemaError("must be a non-empty list of rows", path)
    if len(value) > config.MAX_STATE_DIMENSION * 10:
        raise SchemaError("too many rows", path)
    width = None
    for i, row in enumerate(value):
        if not isinstance(row, list) or not row:
            raise SchemaError("must be a non-empty list of numbers", f"{path}[{i}]")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SchemaError(f"has {len(row)} entries but row 0 has {width}", f"{path}[{i}]")
        for j, x in enumerate(row):
            if not _is_number(x):
                raise SchemaError(f"must be a number, got {x!r}", f"{path}[{i}][{j}]")
            if not math.isfinite(float(x)):
                raise SchemaError("must be finite", f"{path}[{i}][{j}]")
    M = np.array(value, dtype=float)
    if rows is not None and M.shape[0] != rows:
        raise SchemaError(f"must have {rows} rows, got {M.shape[0]}", path)
    if cols is not None and M.shape[1] != cols:
        raise SchemaError(f"must have {cols} columns, got {M.shape[1]}", path)
    return M


def _load_document(document: Document, what: str) -> Dict[str, Any]:
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except (ValueError, RecursionError) as e:
            raise SchemaError(f"{what} is not valid JSON ({e})")
    if not isinstance(document, dict):
        raise SchemaError(f"{what} must be a JSON object")
    return document


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def parse_system(document: Document) -> LtiSystem:
    """
    Parse and validate a system document.

    Schema: {"domain": "discrete"|"continuous", "A": [[...]], "C": [[...]],
    optional "B", "D", "F"}.

    Raises:
        SchemaError: with the field path of the first violation
    """
    doc = _load_document(document, "system document")
    unknown = sorted(set(doc) - SYSTEM_KEYS)
    if unknown:
        raise SchemaError(f"unknown field(s): {', '.join(unknown)}")
    for key in ("domain", "A", "C"):
        if key not in doc:
            raise SchemaError("required field missing", key)

    domain = TimeDomain.from_value(doc["domain"])
    A = _parse_matrix(doc["A"], "A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise SchemaError(f"must be square, got {A.shape[0]}x{A.shape[1]}", "A")
    if n > config.MAX_STATE_DIMENSION:
        raise SchemaError(f"state dimension {n} exceeds {config.MAX_STATE_DIMENSION}", "A")
    C = _parse_matrix(doc["C"], "C", cols=n)
    q = C.shape[0]

    B = _parse_matrix(doc["B"], "B", rows=n) if doc.get("B") is not None else None
    D = None
    if doc.get("D") is not None:
        D = _parse_matrix(doc["D"], "D", rows=q, cols=None if B is None else B.shape[1])
    m = B.shape[1] if B is not None else (D.shape[1] if D is not None else 0)
    B = np.zeros((n, m)) if B is None else B
    D = np.zeros((q, m)) if D is None else D
    F = _parse_matrix(doc["F"], "F", cols=n) if doc.get("F") is not None else None

    sys = LtiSystem(A=A, B=B, C=C, D=D, F=F, domain=domain)
    logger.debug("Parsed %s system n=%d m=%d q=%d r=%d", domain.value, sys.n, sys.m, sys.q, sys.r)
    return sys


def parse_sampling(document: Union[Document, Sequence[float]],
                   domain: Optional[Union[TimeDomain, str]] = None) -> SamplingSequence:
    """
    Parse and validate a sampling document {"times": [...]}.

    A bare list of instants is accepted too. When both the document and the
    caller name a domain they must agree.

    Raises:
        SchemaError: ordering, sign or integrality violations
        DomainMismatch: document domain differs from the requested one
    """
    if isinstance(document, (list, tuple)):
        doc: Dict[str, Any] = {"times": list(document)}
    else:
        doc = _load_document(document, "sampling document")
    unknown = sorted(set(doc) - SAMPLING_KEYS)
    if unknown:
        raise SchemaError(f"unknown field(s): {', '.join(unknown)}")
    if "times" not in doc:
        raise SchemaError("required field missing", "times")
    if not isinstance(doc["times"], list):
        raise SchemaError("must be a list of numbers", "times")

    doc_domain = TimeDomain.from_value(doc["domain"]) if doc.get("domain") is not None else None
    if domain is not None:
        domain = TimeDomain.from_value(domain)
        if doc_domain is not None and doc_domain is not domain:
            raise DomainMismatch(f"sampling document is {doc_domain.value} but the system is {domain.value}")
    domain = domain or doc_domain
    if domain is None:
        raise SchemaError("time domain unknown: pass it or include 'domain'", "domain")
    return SamplingSequence(tuple(_validate_times(doc["times"], domain, "times")), domain)


def system_to_dict(sys: LtiSystem) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"domain": sys.domain.value, "A": sys.A.tolist(), "C": sys.C.tolist()}
    if sys.m > 0:
        doc["B"] = sys.B.tolist()
        doc["D"] = sys.D.tolist()
    if sys.F is not None:
        doc["F"] = sys.F.tolist()
    return doc


def sampling_to_dict(seq: SamplingSequence) -> Dict[str, Any]:
    return {"domain": seq.domain.value, "times": list(seq.times)}


def serialize_system(sys: LtiSystem) -> str:
    """JSON text that parse_system maps back to an equal system."""
    return json.dumps(system_to_dict(sys), sort_keys=True)


def serialize_sampling(seq: SamplingSequence) -> str:
    return json.dumps(sampling_to_dict(seq), sort_keys=True)


def check_domain(sys: LtiSystem, seq: SamplingSequence) -> None:
    if sys.domain is not seq.domain:
        raise DomainMismatch(f"sampling sequence is {seq.domain.value} but the system is {sys.domain.value}")
