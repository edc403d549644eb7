"""Affine connections on a chart and their compatibility with f.

Coefficients are stored as a (1,2)-shaped array ``Γ[σ, α, β] = Γ^σ_{αβ}``.
They are not a tensor (they transform affinely) but they share the dense
Expression storage and the purity machinery of :mod:`nilgeom.tensor`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import (
    ZERO,
    Expression,
    Sym,
    as_expr,
    differentiate,
    div,
    is_zero,
    mul,
    neg,
    parse,
    sub,
    add,
    total,
    Num,
)
from .sampling import Report, Sampling
from .tensor import (
    DOWN,
    UP,
    TensorField,
    adjugate,
    check_nondegenerate,
    is_pure,
    pairs_report,
    tilde_metric,
)


@dataclass(frozen=True, eq=False)
class ConnectionField:
    coefficients: TensorField
    symmetric: bool = True

    def __post_init__(self):
        if self.coefficients.signature != (UP, DOWN, DOWN):
            raise ValueError("connection coefficients need signature (u, l, l)")

    @classmethod
    def zero(cls, coords: Sequence[str]) -> "ConnectionField":
        return cls(TensorField.zeros(coords, (UP, DOWN, DOWN)))

    @classmethod
    def from_components(cls, entries: dict, coords: Sequence[str], symmetric: bool = True) -> "ConnectionField":
        """Build from ``{(σ, α, β): expr-or-string}`` using 0-based indices.

        When ``symmetric`` is set, each (σ, α, β) entry is mirrored to (σ, β, α).
        """
        dim = len(coords)
        comps = np.empty((dim,) * 3, dtype=object)
        comps.fill(ZERO)
        for (s, a, b), e in entries.items():
            e = parse(e, coords) if isinstance(e, str) else as_expr(e)
            comps[s, a, b] = e
            if symmetric:
                comps[s, b, a] = e
        return cls(TensorField(tuple(coords), (UP, DOWN, DOWN), comps), symmetric)

    @property
    def coords(self) -> tuple[str, ...]:
        return self.coefficients.coords

    @property
    def dim(self) -> int:
        return self.coefficients.dim

    @property
    def signature(self):
        return self.coefficients.signature

    @property
    def components(self) -> np.ndarray:
        return self.coefficients.components

    def __getitem__(self, idx) -> Expression:
        return self.coefficients.components[idx]

    def at(self, point) -> np.ndarray:
        return self.coefficients.at(point).array

    def values(self, points) -> np.ndarray:
        return self.coefficients.values(points)

    def symmetry_residual(self, points) -> float:
        v = self.values(points)
        return float(np.max(np.abs(v - np.swapaxes(v, 2, 3)))) if v.size else 0.0


def christoffel(g: TensorField, sampling: Sampling | None = Sampling()) -> ConnectionField:
    """Levi-Civita coefficients 2Γ^σ_{αβ} = g^{σλ}(∂_α g_{βλ} + ∂_β g_{λα} - ∂_λ g_{αβ}).

    g^{σλ} is the symbolic adjugate over the determinant, so the result stays
    exactly differentiable. If ``sampling`` is given the metric is first
    checked for degeneracy at its sample points.
    """
    if g.signature != (DOWN, DOWN):
        raise ValueError("christoffel expects a (0,2) metric")
    if sampling is not None:
        check_nondegenerate(g, sampling.draw(g.dim))
    n = g.dim
    dg = g.partials().components  # dg[λ, α, β] = ∂_λ g_{αβ}
    adj, det = adjugate(g)
    two_det = mul(Num(2.0), det)
    comps = np.empty((n, n, n), dtype=object)
    for a in range(n):
        for b in range(a, n):
            bracket = [sub(add(dg[a, b, l], dg[b, l, a]), dg[l, a, b]) for l in range(n)]
            for s in range(n):
                num = total(mul(adj[s, l], bracket[l]) for l in range(n)
                            if not is_zero(bracket[l]) and not is_zero(adj[s, l]))
                comps[s, a, b] = comps[s, b, a] = div(num, two_det)
    return ConnectionField(TensorField(g.coords, (UP, DOWN, DOWN), comps), True)


def connection_purity(gamma: ConnectionField, f, sampling: Sampling = Sampling()) -> Report:
    """Γ^λ_{βσ} f^α_λ = Γ^α_{λσ} f^λ_β = Γ^α_{βλ} f^λ_σ, checked pairwise.

    Pairs are reported as (upper, lower1), (upper, lower2), (lower1, lower2).
    """
    rep = pairs_report("connection_purity", gamma, f, sampling, pairs=[(0, 1), (0, 2), (1, 2)])
    names = ["upper-vs-lower1", "upper-vs-lower2", "lower1-vs-lower2"]
    for d, name in zip(rep.details, names):
        d["name"] = name
    return rep


def covariant_derivative(T: TensorField, gamma: ConnectionField) -> TensorField:
    """∇_σ T with +Γ for each upper slot and -Γ for each lower slot; σ goes first."""
    n = T.dim
    shape = T.components.shape
    out = np.empty((n,) + shape, dtype=object)
    G = gamma.components
    for s, var in enumerate(T.coords):
        cache: dict = {}
        for idx in np.ndindex(shape):
            terms = [differentiate(T.components[idx], var, cache)]
            for slot, kind in enumerate(T.signature):
                a = idx[slot]
                for l in range(n):
                    other = T.components[idx[:slot] + (l,) + idx[slot + 1:]]
                    if is_zero(other):
                        continue
                    if kind == UP:
                        c = G[a, s, l]
                        if not is_zero(c):
                            terms.append(mul(c, other))
                    else:
                        c = G[l, s, a]
                        if not is_zero(c):
                            terms.append(neg(mul(c, other)))
            out[(s,) + idx] = total(terms)
    return TensorField(T.coords, (DOWN,) + T.signature, out)


def max_abs(T: TensorField, points) -> float:
    v = T.values(points)
    return float(np.max(np.abs(v))) if v.size else 0.0


def metricity_residual(g: TensorField, gamma: ConnectionField, sampling: Sampling = Sampling()) -> Report:
    pts = sampling.draw(g.dim)
    res = max_abs(covariant_derivative(g, gamma), pts)
    return Report("metricity", res <= sampling.tol, res, sampling.tol, len(pts))


def nabla_f_check(gamma: ConnectionField, f: TensorField, sampling: Sampling = Sampling()) -> Report:
    """If ∇f ≈ 0 and Γ is pure in (upper, lower1), then ∂f ≈ 0.

    Reports the three residuals and passes iff the implication is not violated.
    """
    pts = sampling.draw(gamma.dim)
    nf = max_abs(covariant_derivative(f, gamma), pts)
    purity = is_pure(gamma, 0, 1, f, sampling, pts)
    df_field = f.partials()
    df = max_abs(df_field, pts)
    df_exact = all(is_zero(e) for e in df_field.components.flat)
    tol = sampling.tol
    premise = nf <= tol and purity.passed
    conclusion = df <= tol
    details = [
        {"name": "nabla_f", "residual": nf, "passed": nf <= tol},
        {"name": "purity_upper_lower1", "residual": purity.max_residual, "passed": purity.passed},
        {"name": "partial_f", "residual": df, "exactly_zero": df_exact, "passed": conclusion},
        {"name": "implication", "premise": premise, "conclusion": conclusion,
         "passed": (not premise) or conclusion},
    ]
    return Report("lemma1", (not premise) or conclusion, max(nf, df), tol, len(pts), details=details)


def _fiber_names(base: Sequence[str]) -> tuple[str, ...]:
    n = len(base)
    if tuple(base) == tuple(f"z{k}" for k in range(1, n + 1)):
        return tuple(f"z{k}" for k in range(n + 1, 2 * n + 1))
    return tuple(f"y{c}" for c in base)


def complete_lift(base: ConnectionField, fiber_coords: Sequence[str] | None = None) -> ConnectionField:
    """Complete lift of a base connection to the 2n-dimensional chart (u, y).

    Γ̂^h_{ik} = Γ^h_{ik}, Γ̂^{n+h}_{ik} = y^s ∂_s Γ^h_{ik},
    Γ̂^{n+h}_{i,n+k} = Γ̂^{n+h}_{n+i,k} = Γ^h_{ik}, every other block zero.
    """
    n = base.dim
    fiber = tuple(fiber_coords) if fiber_coords else _fiber_names(base.coords)
    coords = base.coords + fiber
    G = base.components
    comps = np.empty((2 * n,) * 3, dtype=object)
    comps.fill(ZERO)
    caches = [dict() for _ in range(n)]
    for h in range(n):
        for i in range(n):
            for k in range(n):
                c = G[h, i, k]
                comps[h, i, k] = c
                comps[n + h, i, n + k] = c
                comps[n + h, n + i, k] = c
                comps[n + h, i, k] = total(mul(Sym(fiber[s]), differentiate(c, base.coords[s], caches[s]))
                                           for s in range(n))
    return ConnectionField(TensorField(coords, (UP, DOWN, DOWN), comps), base.symmetric)


def complete_lift_metric(g: TensorField, fiber_coords: Sequence[str] | None = None) -> TensorField:
    """g^C = [[y^s ∂_s g_ij, g_ij], [g_ij, 0]] on the chart (u, y)."""
    n = g.dim
    fiber = tuple(fiber_coords) if fiber_coords else _fiber_names(g.coords)
    comps = np.empty((2 * n, 2 * n), dtype=object)
    comps.fill(ZERO)
    caches = [dict() for _ in range(n)]
    for i in range(n):
        for j in range(n):
            c = g.components[i, j]
            comps[i, n + j] = comps[n + i, j] = c
            comps[i, j] = total(mul(Sym(fiber[s]), differentiate(c, g.coords[s], caches[s])) for s in range(n))
    return TensorField(g.coords + fiber, (DOWN, DOWN), comps)


def metric_plus_tilde(g: TensorField, f: TensorField, sampling: Sampling | None = Sampling()) -> TensorField:
    """g + g̃ with g̃_{αβ} = g_{λβ} f^λ_α; raises SingularMetricError if degenerate."""
    h = g + tilde_metric(g, f)
    if sampling is not None:
        check_nondegenerate(h, sampling.draw(g.dim))
    return h


def partials_purity(g: TensorField, f, sampling: Sampling = Sampling(), points=None) -> Report:
    """Purity of the array ∂_σ g_{αβ} in all three slot pairs."""
    return pairs_report("partials_purity", g.partials(), f, sampling, points=points)


def conformal_purity_scan(g: TensorField, h: Expression, f, sampling: Sampling = Sampling()) -> Report:
    """Purity of ∂_σ(h g_{αβ}); also whether every partial of h vanishes at samples."""
    pts = sampling.draw(g.dim)
    rep = partials_purity(g.scaled(h), f, sampling, pts)
    hg = TensorField(g.coords, (), np.array(as_expr(h), dtype=object).reshape(()))
    dh = max_abs(hg.partials(), pts)
    rep.check = "conformal_purity"
    rep.details.append({"name": "h_partials_max", "value": dh, "h_partials_vanish": dh <= sampling.tol})
    return rep


def one_form(components, coords: Sequence[str]) -> TensorField:
    comps = np.empty(len(coords), dtype=object)
    for i, c in enumerate(components):
        comps[i] = parse(c, coords) if isinstance(c, str) else as_expr(c)
    return TensorField(tuple(coords), (DOWN,), comps)


def deformation_tensor(q: TensorField, f: TensorField) -> TensorField:
    """T^n_{ik} = δ^n_i q̃_k + f^n_i q_k + δ^n_k q̃_i + f^n_k q_i with q̃_i = q_s f^s_i."""
    d = q.dim
    F = f.components
    qt = [total(mul(q.components[s], F[s, i]) for s in range(d) if not is_zero(F[s, i])) for i in range(d)]
    comps = np.empty((d, d, d), dtype=object)
    for n in range(d):
        for i in range(d):
            for k in range(d):
                terms = []
                if n == i:
                    terms.append(qt[k])
                if n == k:
                    terms.append(qt[i])
                terms.append(mul(F[n, i], q.components[k]))
                terms.append(mul(F[n, k], q.components[i]))
                comps[n, i, k] = total(terms)
    return TensorField(q.coords, (UP, DOWN, DOWN), comps)


def deform(gamma: ConnectionField, T: TensorField) -> ConnectionField:
    """Γ̄ = Γ + T."""
    if T.signature != (UP, DOWN, DOWN) or T.coords != gamma.coords:
        raise ValueError("deformation tensor must be a (1,2) field on the connection's chart")
    return ConnectionField(gamma.coefficients + T, gamma.symmetric)


def connection_difference(a: ConnectionField, b: ConnectionField, points) -> float:
    return float(np.max(np.abs(a.values(points) - b.values(points))))
