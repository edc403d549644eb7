"""Chart bookkeeping for a (2n+m)-dimensional chart with a nilpotent f.

Coordinates are ordered (z^i, z^{n+i}, z^{2n+a}): n base coordinates, n
tangent-fiber coordinates and m extra fiber coordinates. In the adapted
basis f^{n+i}_i = 1 and every other component vanishes, so ker f is
spanned by the last n+m coordinate directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import Expression, Sym, differentiate, free_symbols, is_zero, lambdify, mul, parse, total
from .sampling import Report, Sampling
from .tensor import (
    DOWN,
    UP,
    TensorField,
    check_nondegenerate,
    symmetry_residual,
)


class SingularJacobianError(ArithmeticError):
    def __init__(self, point, det: float):
        self.point = np.asarray(point, dtype=float)
        self.det = det
        super().__init__(f"base Jacobian is singular at {self.point.tolist()} (det={det:.3e})")


def default_coords(dim: int) -> tuple[str, ...]:
    return tuple(f"z{k}" for k in range(1, dim + 1))


def adapted_f_array(n: int, m: int = 0) -> np.ndarray:
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    dim = 2 * n + m
    f = np.zeros((dim, dim))
    for i in range(n):
        f[n + i, i] = 1.0
    return f


def adapted_f(n: int, m: int = 0, coords: Sequence[str] | None = None) -> TensorField:
    """Constant (1,1) field with f^{n+i}_i = 1."""
    arr = adapted_f_array(n, m)
    coords = tuple(coords) if coords is not None else default_coords(arr.shape[0])
    return TensorField.constant(arr, coords, (UP, DOWN))


def rref(A: np.ndarray, tol: float | None = None) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form with partial pivoting; returns (R, pivot columns)."""
    R = np.array(A, dtype=float, copy=True)
    rows, cols = R.shape
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.max(np.abs(R))) if R.size else 1.0)
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) <= tol:
            R[r:, c] = 0.0
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, c]
        for k in range(rows):
            if k != r and R[k, c] != 0.0:
                R[k] -= R[k, c] * R[r]
        pivots.append(c)
        r += 1
    return R, pivots


def kernel_basis(f, tol: float | None = None) -> list[np.ndarray]:
    """Basis of the null space of a matrix (one vector per free column)."""
    A = f.array if hasattr(f, "array") else np.asarray(f, dtype=float)
    R, pivots = rref(A, tol)
    cols = A.shape[1]
    basis = []
    for free in (c for c in range(cols) if c not in pivots):
        v = np.zeros(cols)
        v[free] = 1.0
        for row, pc in enumerate(pivots):
            v[pc] = -R[row, free] + 0.0
        basis.append(v)
    return basis


def in_kernel(f: np.ndarray, v: np.ndarray, tol: float = 1e-10) -> bool:
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(f @ v))) <= tol * (1.0 + float(np.max(np.abs(v))))


def compatible_metric_basis(f: np.ndarray, kind: str = "pure") -> list[np.ndarray]:
    """Basis of constant symmetric matrices g with g̃ = g(f·,·) symmetric or antisymmetric.

    ``kind="pure"`` gives g(fx, y) = g(x, fy); ``kind="hybrid"`` gives
    g(fx, y) = -g(x, fy). Solved as a homogeneous linear system by row
    reduction.
    """
    if kind not in ("pure", "hybrid"):
        raise ValueError("kind must be 'pure' or 'hybrid'")
    f = np.asarray(f, dtype=float)
    d = f.shape[0]
    unknowns = [(i, j) for i in range(d) for j in range(i, d)]
    col = {}
    for k, (i, j) in enumerate(unknowns):
        col[(i, j)] = col[(j, i)] = k
    sign = -1.0 if kind == "pure" else 1.0
    rows = []
    for a in range(d):
        for b in range(d):
            # g̃_ab + sign * g̃_ba = 0 with g̃_ab = sum_l g_lb f^l_a
            row = np.zeros(len(unknowns))
            for l in range(d):
                row[col[(l, b)]] += f[l, a]
                row[col[(l, a)]] += sign * f[l, b]
            rows.append(row)
    basis = []
    for v in kernel_basis(np.array(rows)):
        g = np.zeros((d, d))
        for k, (i, j) in enumerate(unknowns):
            g[i, j] = g[j, i] = v[k]
        basis.append(g)
    return basis


@dataclass(frozen=True, eq=False)
class ChartManifold:
    """Dimensions, coordinate names, metric and nilpotent structure of one chart."""

    n: int
    m: int
    metric: TensorField
    f: TensorField = None
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ValueError("need n >= 1 and m >= 0")
        if self.metric.dim != self.dim or self.metric.signature != (DOWN, DOWN):
            raise ValueError(f"metric must be a (0,2) field of size {self.dim}")
        if self.f is None:
            object.__setattr__(self, "f", adapted_f(self.n, self.m, self.metric.coords))
        if self.f.dim != self.dim or self.f.signature != (UP, DOWN):
            raise ValueError("f must be a (1,1) field on the same chart")

    @property
    def dim(self) -> int:
        return 2 * self.n + self.m

    @property
    def coords(self) -> tuple[str, ...]:
        return self.metric.coords

    def f_is_constant(self) -> bool:
        """True when every coordinate partial of f is exactly zero."""
        return all(is_zero(differentiate(e, x)) for e in self.f.components.flat for x in self.coords)

    def f_constant_array(self) -> np.ndarray:
        if not self.f_is_constant():
            raise ValueError("f is not constant on this chart")
        return self.f.at(np.zeros(self.dim)).array

    def validate(self, sampling: Sampling = Sampling()) -> Report:
        """Metric symmetric and nondegenerate, f^2 = 0 and rank f = n at samples."""
        pts = sampling.draw(self.dim)
        dets = check_nondegenerate(self.metric, pts)
        sym = symmetry_residual(self.metric, 0, 1, pts)
        fv = self.f.values(pts)
        f2 = float(max(np.max(np.abs(F @ F)) for F in fv))
        ranks = sorted({int(np.linalg.matrix_rank(F, tol=1e-9)) for F in fv})
        parts = [
            {"name": "metric_symmetric", "residual": sym, "passed": sym <= 1e-12},
            {"name": "metric_nondegenerate", "min_abs_det": float(np.min(np.abs(dets))),
             "passed": bool(np.min(np.abs(dets)) >= 1e-12)},
            {"name": "f_squared_zero", "residual": f2, "passed": f2 <= 1e-12},
            {"name": "f_rank", "ranks": ranks, "expected": self.n, "passed": ranks == [self.n]},
            {"name": "f_constant", "value": self.f_is_constant(), "passed": True},
        ]
        return Report("validate", all(p["passed"] for p in parts), max(sym, f2), 1e-12,
                      len(pts), details=parts)


@dataclass(frozen=True, eq=False)
class TransitionMap:
    """Change of chart: z^i = φ^i(z̄^1..z̄^n), z^{2n+a} = Θ^a(z̄^1..z̄^n; z̄^{2n+1}..z̄^{2n+m})."""

    n: int
    m: int
    phi: tuple[Expression, ...]
    theta: tuple[Expression, ...] = ()
    source_coords: tuple[str, ...] = field(default=None)

    def __post_init__(self):
        if len(self.phi) != self.n or len(self.theta) != self.m:
            raise ValueError("need n expressions for phi and m for theta")
        coords = self.source_coords or default_coords(2 * self.n + self.m)
        object.__setattr__(self, "source_coords", tuple(coords))
        base = set(coords[: self.n])
        extra = set(coords[2 * self.n:])
        for e in self.phi:
            if not free_symbols(e) <= base:
                raise ValueError(f"phi component {e} may only depend on base coordinates")
        for e in self.theta:
            if not free_symbols(e) <= base | extra:
                raise ValueError(f"theta component {e} may not depend on tangent-fiber coordinates")

    @classmethod
    def from_strings(cls, n: int, m: int, phi: Sequence[str], theta: Sequence[str] = (),
                     coords: Sequence[str] | None = None) -> "TransitionMap":
        coords = tuple(coords) if coords else default_coords(2 * n + m)
        return cls(n, m, tuple(parse(s, coords) for s in phi),
                   tuple(parse(s, coords) for s in theta), coords)


@dataclass(frozen=True, eq=False)
class LiftedTransition:
    components: tuple[Expression, ...]
    jacobian: TensorField
    report: Report

    def apply(self, point) -> np.ndarray:
        fn = lambdify(self.components, self.jacobian.coords)
        return np.array(fn(*np.asarray(point, dtype=float).tolist()))


def lift_transition(t: TransitionMap, sampling: Sampling = Sampling()) -> LiftedTransition:
    """Full coordinate change with z^{n+i} = Σ_k ∂φ^i/∂z̄^k z̄^{n+k}, its Jacobian,
    and a certificate that the Jacobian commutes with the adapted f."""
    n, m = t.n, t.m
    xs = t.source_coords
    middle = []
    for i in range(n):
        middle.append(total(mul(differentiate(t.phi[i], xs[k]), Sym(xs[n + k])) for k in range(n)))
    comps = tuple(t.phi) + tuple(middle) + tuple(t.theta)
    dim = 2 * n + m
    J = np.empty((dim, dim), dtype=object)
    for a in range(dim):
        for b in range(dim):
            J[a, b] = differentiate(comps[a], xs[b])
    jac = TensorField(xs, (UP, DOWN), J)

    pts = sampling.draw(dim)
    Jv = jac.values(pts)
    for p, Jp in zip(pts, Jv):
        d = float(np.linalg.det(Jp[:n, :n]))
        if not abs(d) >= 1e-12:
            raise SingularJacobianError(p, d)
    F = adapted_f_array(n, m)
    res = float(max(np.max(np.abs(Jp @ F - F @ Jp)) for Jp in Jv))
    report = Report("transition_commutes_with_f", res <= sampling.tol, res, sampling.tol, len(pts))
    return LiftedTransition(comps, jac, report)
