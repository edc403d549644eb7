"""Dense tensor fields over a single chart, and the purity/hybridity tests.

Component arrays are indexed in slot order, and a (1,1) field ``f`` is
stored as ``f[upper, lower]`` so ``f[a, b]`` is the component f^a_b.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .expr import (
    ZERO,
    Expression,
    as_expr,
    differentiate,
    div,
    is_constant,
    is_zero,
    lambdify,
    mul,
    neg,
    parse,
    sub,
    total,
    add,
)
from .sampling import Report, Sampling

UP, DOWN = "u", "l"


class SingularMetricError(ArithmeticError):
    """The metric is (numerically) degenerate at a sample point."""

    def __init__(self, point, det: float):
        self.point = np.asarray(point, dtype=float)
        self.det = det
        super().__init__(f"singular metric at point {self.point.tolist()} (det={det:.3e})")


def _check_signature(signature: Sequence[str]) -> tuple[str, ...]:
    signature = tuple(signature)
    for s in signature:
        if s not in (UP, DOWN):
            raise ValueError(f"slot kind must be {UP!r} or {DOWN!r}, got {s!r}")
    return signature


@dataclass(frozen=True)
class TensorValue:
    """A tensor at one point: signature plus a numeric dense array."""

    signature: tuple[str, ...]
    array: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "signature", _check_signature(self.signature))
        arr = np.asarray(self.array, dtype=float)
        if arr.ndim != len(self.signature) or (arr.ndim and len(set(arr.shape)) != 1):
            raise ValueError(f"array shape {arr.shape} does not fit signature {self.signature}")
        object.__setattr__(self, "array", arr)

    @property
    def rank(self) -> int:
        return len(self.signature)

    @property
    def dim(self) -> int:
        return self.array.shape[0] if self.rank else 0


@dataclass(frozen=True, eq=False)
class TensorField:
    """Expressions for every component of a tensor on a chart."""

    coords: tuple[str, ...]
    signature: tuple[str, ...]
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "signature", _check_signature(self.signature))
        comps = np.empty(np.shape(self.components), dtype=object)
        for idx in np.ndindex(comps.shape):
            comps[idx] = as_expr(self.components[idx])
        expected = (len(self.coords),) * len(self.signature)
        if comps.shape != expected:
            raise ValueError(f"component array has shape {comps.shape}, expected {expected}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_strings(cls, rows, coords: Sequence[str], signature: Sequence[str],
                     params: Iterable[str] = ()) -> "TensorField":
        names = list(coords) + list(params)
        arr = np.asarray(rows, dtype=object)
        comps = np.empty(arr.shape, dtype=object)
        for idx in np.ndindex(arr.shape):
            comps[idx] = parse(str(arr[idx]), names)
        return cls(tuple(coords), tuple(signature), comps)

    @classmethod
    def constant(cls, array, coords: Sequence[str], signature: Sequence[str]) -> "TensorField":
        arr = np.asarray(array, dtype=float)
        comps = np.empty(arr.shape, dtype=object)
        for idx in np.ndindex(arr.shape):
            comps[idx] = as_expr(float(arr[idx]))
        return cls(tuple(coords), tuple(signature), comps)

    @classmethod
    def zeros(cls, coords: Sequence[str], signature: Sequence[str]) -> "TensorField":
        shape = (len(coords),) * len(signature)
        comps = np.empty(shape, dtype=object)
        comps.fill(ZERO)
        return cls(tuple(coords), tuple(signature), comps)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def rank(self) -> int:
        return len(self.signature)

    def __getitem__(self, idx) -> Expression:
        return self.components[idx]

    @cached_property
    def _compiled(self):
        return lambdify(list(self.components.flat), self.coords)

    def at(self, point) -> TensorValue:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise ValueError(f"point must have {self.dim} coordinates")
        flat = self._compiled(*point.tolist())
        return TensorValue(self.signature, np.array(flat, dtype=float).reshape(self.components.shape))

    def values(self, points) -> np.ndarray:
        """Component arrays at each row of ``points``; shape (N, dim, ..., dim)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        fn = self._compiled
        out = np.array([fn(*p) for p in points.tolist()], dtype=float)
        return out.reshape((len(points),) + self.components.shape)

    def is_constant(self) -> bool:
        return all(is_constant(e) for e in self.components.flat)

    def partials(self) -> "TensorField":
        """Coordinate partials ∂_σ T as a field with a new lower slot in front."""
        comps = np.empty((self.dim,) + self.components.shape, dtype=object)
        for s, var in enumerate(self.coords):
            cache: dict = {}
            for idx in np.ndindex(self.components.shape):
                comps[(s,) + idx] = differentiate(self.components[idx], var, cache)
        return TensorField(self.coords, (DOWN,) + self.signature, comps)

    def map(self, fn) -> "TensorField":
        comps = np.empty(self.components.shape, dtype=object)
        for idx in np.ndindex(comps.shape):
            comps[idx] = fn(self.components[idx])
        return TensorField(self.coords, self.signature, comps)

    def __add__(self, other: "TensorField") -> "TensorField":
        _same_shape(self, other)
        comps = np.empty(self.components.shape, dtype=object)
        for idx in np.ndindex(comps.shape):
            comps[idx] = add(self.components[idx], other.components[idx])
        return TensorField(self.coords, self.signature, comps)

    def __sub__(self, other: "TensorField") -> "TensorField":
        _same_shape(self, other)
        comps = np.empty(self.components.shape, dtype=object)
        for idx in np.ndindex(comps.shape):
            comps[idx] = sub(self.components[idx], other.components[idx])
        return TensorField(self.coords, self.signature, comps)

    def scaled(self, factor: Expression) -> "TensorField":
        factor = as_expr(factor)
        return self.map(lambda e: mul(factor, e))

    def to_strings(self) -> list:
        return np.vectorize(str, otypes=[object])(self.components).tolist()


def _same_shape(a: TensorField, b: TensorField):
    if a.coords != b.coords or a.signature != b.signature:
        raise ValueError("tensor fields live on different charts or have different signatures")


FieldLike = Union[TensorField, TensorValue, np.ndarray]


def evaluate_field(T: TensorField, point) -> TensorValue:
    return T.at(point)


def contract(T: TensorValue, slot_a: int, slot_b: int) -> TensorValue:
    """Sum over a paired upper slot ``slot_a`` and lower slot ``slot_b``."""
    if T.signature[slot_a] != UP or T.signature[slot_b] != DOWN:
        raise ValueError("contraction needs one upper and one lower slot")
    arr = np.trace(T.array, axis1=slot_a, axis2=slot_b)
    sig = tuple(s for i, s in enumerate(T.signature) if i not in (slot_a, slot_b))
    return TensorValue(sig, arr)


def tensor_product(A: TensorValue, B: TensorValue) -> TensorValue:
    return TensorValue(A.signature + B.signature, np.multiply.outer(A.array, B.array))


def _f_array(f: FieldLike) -> np.ndarray:
    arr = f.array if isinstance(f, TensorValue) else np.asarray(f, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("f must be a square (1,1) array")
    return arr


def apply_f_array(arr: np.ndarray, f: np.ndarray, slot: int, kind: str) -> np.ndarray:
    """Contract ``f`` into one axis of a (possibly batched) component array.

    Lower slot: T_{..λ..} f^λ_α. Upper slot: f^α_λ T^{..λ..}.
    ``slot`` counts from the end when negative, so a leading batch axis is fine.
    """
    axis = slot if slot >= 0 else arr.ndim + slot
    if kind == DOWN:
        out = np.tensordot(arr, f, axes=([axis], [0]))
    else:
        out = np.tensordot(arr, f, axes=([axis], [1]))
    return np.moveaxis(out, -1, axis)


def apply_f_to_slot(T: TensorValue, f: FieldLike, slot: int) -> TensorValue:
    f = _f_array(f)
    if f.shape[0] != T.dim:
        raise ValueError(f"f has dimension {f.shape[0]}, tensor has {T.dim}")
    return TensorValue(T.signature, apply_f_array(T.array, f, slot, T.signature[slot]))


def _field_samples(T, points: np.ndarray) -> np.ndarray:
    if isinstance(T, TensorField):
        return T.values(points)
    if hasattr(T, "values"):
        return T.values(points)
    raise TypeError(f"cannot sample {type(T).__name__}")


def _f_samples(f, points: np.ndarray) -> np.ndarray:
    if isinstance(f, TensorField):
        return f.values(points)
    arr = _f_array(f)
    return np.broadcast_to(arr, (len(points),) + arr.shape)


def _pair_residual(values: np.ndarray, fs: np.ndarray, signature, slot_a: int, slot_b: int,
                   sign: float) -> np.ndarray:
    """Per-point max |f·T (slot a) - sign * f·T (slot b)|."""
    res = np.empty(len(values))
    for k in range(len(values)):
        ta = apply_f_array(values[k], fs[k], slot_a, signature[slot_a])
        tb = apply_f_array(values[k], fs[k], slot_b, signature[slot_b])
        diff = ta - sign * tb
        res[k] = np.max(np.abs(diff)) if diff.size else 0.0
    return res


def _pair_report(name, T, slot_a, slot_b, f, sampling: Sampling, sign: float,
                 points: np.ndarray | None = None, signature=None) -> Report:
    if points is None:
        points = sampling.draw(T.dim if hasattr(T, "dim") else len(T.coords))
    values = _field_samples(T, points)
    signature = signature or T.signature
    res = _pair_residual(values, _f_samples(f, points), signature, slot_a, slot_b, sign)
    worst = float(res.max()) if len(res) else 0.0
    scale = 1.0 + (float(np.max(np.abs(values))) if values.size else 0.0)
    k = int(np.argmax(res)) if len(res) else 0
    return Report(
        check=name,
        passed=worst <= sampling.tol * scale,
        max_residual=worst,
        tolerance=sampling.tol,
        points_sampled=len(points),
        scale=scale,
        details=[{"slots": [slot_a, slot_b], "worst_point": points[k].tolist() if len(points) else []}],
    )


def is_pure(T, slot_a: int, slot_b: int, f, sampling: Sampling = Sampling(), points=None) -> Report:
    """Certify f·T in slot a equals f·T in slot b at sample points."""
    return _pair_report("purity", T, slot_a, slot_b, f, sampling, 1.0, points)


def is_hybrid(T, slot_a: int, slot_b: int, f, sampling: Sampling = Sampling(), points=None) -> Report:
    """Certify f·T in slot a equals minus f·T in slot b at sample points."""
    return _pair_report("hybridity", T, slot_a, slot_b, f, sampling, -1.0, points)


def all_pairs(rank: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(rank), 2))


def pairs_report(check: str, T, f, sampling: Sampling = Sampling(), pairs=None,
                 hybrid: bool = False, points=None) -> Report:
    """Purity (or hybridity) of ``T`` in each slot pair; passes iff every pair passes."""
    pairs = pairs if pairs is not None else all_pairs(len(T.signature))
    if points is None:
        points = sampling.draw(T.dim)
    test = is_hybrid if hybrid else is_pure
    parts = [test(T, a, b, f, sampling, points) for a, b in pairs]
    worst = max((p.max_residual for p in parts), default=0.0)
    return Report(
        check=check,
        passed=all(p.passed for p in parts),
        max_residual=worst,
        tolerance=sampling.tol,
        points_sampled=len(points),
        scale=max((p.scale for p in parts), default=1.0),
        details=[{"pair": [a, b], "residual": p.max_residual, "passed": p.passed}
                 for (a, b), p in zip(pairs, parts)],
    )


# -- determinants and inverses ----------------------------------------------

def symbolic_det(M: np.ndarray) -> Expression:
    return _Minors(M).det(tuple(range(M.shape[0])), tuple(range(M.shape[1])))


class _Minors:
    """Memoised Laplace expansion; minors are shared between cofactors."""

    def __init__(self, M: np.ndarray):
        self.M = M
        self.memo: dict[tuple, Expression] = {}

    def det(self, rows: tuple[int, ...], cols: tuple[int, ...]) -> Expression:
        key = (rows, cols)
        if key in self.memo:
            return self.memo[key]
        if not rows:
            result = as_expr(1.0)
        elif len(rows) == 1:
            result = self.M[rows[0], cols[0]]
        else:
            r, rest = rows[0], rows[1:]
            result = ZERO
            for j, c in enumerate(cols):
                entry = self.M[r, c]
                if is_zero(entry):
                    continue
                term = mul(entry, self.det(rest, cols[:j] + cols[j + 1:]))
                result = add(result, term) if j % 2 == 0 else sub(result, term)
        self.memo[key] = result
        return result


def adjugate(g: TensorField) -> tuple[np.ndarray, Expression]:
    """Symbolic adjugate matrix and determinant of a square rank-2 field."""
    n = g.dim
    minors = _Minors(g.components)
    full = tuple(range(n))
    det = minors.det(full, full)
    adj = np.empty((n, n), dtype=object)
    symmetric = is_symmetric_symbolic(g)
    for i in range(n):
        for j in range(n):
            if symmetric and j < i:
                adj[i, j] = adj[j, i]
                continue
            cof = minors.det(full[:j] + full[j + 1:], full[:i] + full[i + 1:])
            adj[i, j] = neg(cof) if (i + j) % 2 else cof
    return adj, det


def inverse_metric(g: TensorField) -> TensorField:
    """g^{ab} = adj(g)/det(g), built symbolically with shared minors."""
    if g.signature != (DOWN, DOWN):
        raise ValueError("inverse_metric expects a (0,2) field")
    adj, det = adjugate(g)
    comps = np.empty(adj.shape, dtype=object)
    for idx in np.ndindex(adj.shape):
        comps[idx] = div(adj[idx], det)
    return TensorField(g.coords, (UP, UP), comps)


def is_symmetric_symbolic(T: TensorField) -> bool:
    c = T.components
    return all(c[i, j] is c[j, i] or c[i, j] == c[j, i]
               for i in range(T.dim) for j in range(i + 1, T.dim))


def numeric_inverse(g: np.ndarray, point=None, min_det: float = 1e-12) -> np.ndarray:
    """Inverse via LU with partial pivoting (LAPACK); refuses |det| < min_det."""
    g = np.asarray(g, dtype=float)
    det = float(np.linalg.det(g))
    if not abs(det) >= min_det:
        raise SingularMetricError(point if point is not None else [], det)
    return np.linalg.inv(g)


def check_nondegenerate(g: TensorField, points: np.ndarray, min_det: float = 1e-12) -> np.ndarray:
    """Return det g at each point; raises SingularMetricError at the first bad one."""
    values = g.values(points)
    dets = np.linalg.det(values)
    for p, d in zip(points, dets):
        if not abs(d) >= min_det:
            raise SingularMetricError(p, float(d))
    return dets


# -- index gymnastics --------------------------------------------------------

def _reindex(T: TensorField, slot: int, metric: TensorField, new_kind: str) -> TensorField:
    n = T.dim
    comps = np.empty(T.components.shape, dtype=object)
    for idx in np.ndindex(comps.shape):
        a = idx[slot]
        terms = []
        for t in range(n):
            m = metric.components[a, t]
            if is_zero(m):
                continue
            src = T.components[idx[:slot] + (t,) + idx[slot + 1:]]
            terms.append(mul(m, src))
        comps[idx] = total(terms)
    sig = T.signature[:slot] + (new_kind,) + T.signature[slot + 1:]
    return TensorField(T.coords, sig, comps)


def lower_index(T: TensorField, g: TensorField, slot: int) -> TensorField:
    """T_{..a..} = g_{at} T^{..t..} for an upper ``slot``."""
    if T.signature[slot] != UP:
        raise ValueError(f"slot {slot} is not an upper slot")
    return _reindex(T, slot, g, DOWN)


def raise_index(T: TensorField, g_inv: TensorField, slot: int) -> TensorField:
    """T^{..a..} = g^{at} T_{..t..} for a lower ``slot``."""
    if T.signature[slot] != DOWN:
        raise ValueError(f"slot {slot} is not a lower slot")
    return _reindex(T, slot, g_inv, UP)


def lower_value(T: TensorValue, g: np.ndarray, slot: int) -> TensorValue:
    if T.signature[slot] != UP:
        raise ValueError(f"slot {slot} is not an upper slot")
    arr = np.moveaxis(np.tensordot(T.array, g, axes=([slot], [1])), -1, slot)
    return TensorValue(T.signature[:slot] + (DOWN,) + T.signature[slot + 1:], arr)


def raise_value(T: TensorValue, g_inv: np.ndarray, slot: int) -> TensorValue:
    if T.signature[slot] != DOWN:
        raise ValueError(f"slot {slot} is not a lower slot")
    arr = np.moveaxis(np.tensordot(T.array, g_inv, axes=([slot], [1])), -1, slot)
    return TensorValue(T.signature[:slot] + (UP,) + T.signature[slot + 1:], arr)


def tilde_metric(g: TensorField, f: TensorField) -> TensorField:
    """g̃_{ab} = g_{λb} f^λ_a, i.e. g(fx, y)."""
    n = g.dim
    comps = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            comps[a, b] = total(mul(g.components[l, b], f.components[l, a])
                                for l in range(n) if not is_zero(f.components[l, a]))
    return TensorField(g.coords, (DOWN, DOWN), comps)


def symmetry_residual(T: TensorField, slot_a: int, slot_b: int, points, antisymmetric=False) -> float:
    vals = T.values(points)
    swapped = np.swapaxes(vals, slot_a + 1, slot_b + 1)
    diff = vals + swapped if antisymmetric else vals - swapped
    return float(np.max(np.abs(diff))) if diff.size else 0.0
