"""Seeded sample boxes and residual reports shared by every check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(frozen=True)
class Sampling:
    """Where and how strictly a pointwise identity is certified.

    Points are drawn uniformly from ``[low, high]^dim`` with a numpy
    ``default_rng(seed)``; the same (seed, points, box) always yields the
    same points.
    """

    points: int = 20
    low: float = -1.0
    high: float = 1.0
    seed: int = 42
    tol: float = 1e-9

    def draw(self, dim: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.low, self.high, size=(self.points, dim))

    def with_(self, **changes) -> "Sampling":
        return Sampling(**{**self.__dict__, **changes})


@dataclass
class Report:
    """Outcome of a numeric check.

    ``passed`` is true only if every sub-check in ``details`` passed (when
    details carry their own ``passed`` flag) and ``max_residual`` is within
    ``tolerance`` (scaled by ``scale`` when the check is relative).
    """

    check: str
    passed: bool
    max_residual: float
    tolerance: float
    points_sampled: int = 0
    scale: float = 1.0
    details: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "passed": bool(self.passed),
            "max_residual": _clean(self.max_residual),
            "tolerance": _clean(self.tolerance),
            "scale": _clean(self.scale),
            "points_sampled": int(self.points_sampled),
            "details": _clean(self.details),
        }


def _clean(obj):
    """Convert numpy scalars/arrays to plain JSON-friendly Python values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if v != v or v in (float("inf"), float("-inf")):
            return str(v)
        return v
    return obj


def combine(check: str, parts: list[Report], points: int | None = None) -> Report:
    """Merge sub-reports by max-reduction; passes only if all parts pass."""
    worst = max((p.max_residual for p in parts), default=0.0)
    return Report(
        check=check,
        passed=all(p.passed for p in parts),
        max_residual=worst,
        tolerance=max((p.tolerance for p in parts), default=0.0),
        points_sampled=points if points is not None else max((p.points_sampled for p in parts), default=0),
        details=[p.to_dict() for p in parts],
    )
