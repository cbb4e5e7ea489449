"""Audit records, sweep reports, and deterministic serialization."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = ["AuditRecord", "SweepReport", "json_bytes", "rows_to_csv", "digest_arrays"]

_HOLD_TOL = 1e-9


@dataclass(frozen=True)
class AuditRecord:
    """One checked inequality: holds iff lhs <= rhs + 1e-9."""

    name: str
    lhs: float
    rhs: float
    parameters: dict = field(default_factory=dict)
    applicable: bool = True

    @property
    def holds(self) -> bool:
        return (not self.applicable) or self.lhs <= self.rhs + _HOLD_TOL

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "slack": self.slack,
            "applicable": self.applicable,
            "parameters": dict(self.parameters),
        }


@dataclass
class SweepReport:
    rows: list[dict]
    metadata: dict = field(default_factory=dict)
    audits: list[AuditRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "meta": dict(self.metadata),
            "rows": [dict(r) for r in self.rows],
            "audits": [a.to_dict() for a in self.audits],
        }


def _default(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _sanitize(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def json_bytes(payload: dict) -> bytes:
    """Canonical JSON: sorted keys, fixed separators; bit-stable per run config."""
    return json.dumps(_sanitize(payload), sort_keys=True, separators=(",", ":"),
                      default=_default).encode() + b"\n"


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _sanitize(v) if not isinstance(v, Fraction) else str(v)
                         for k, v in r.items()})
    return buf.getvalue()


def digest_arrays(*arrays) -> str:
    """Content digest of numpy arrays (dataset fingerprint for reports)."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()
