"""Riemann curvature of a connection and its purity/hybridity with respect to f.

Index convention (fixed): ``R[ρ, σ, μ, ν] = R^ρ_{σμν}`` with

    R^ρ_{σμν} = ∂_μ Γ^ρ_{νσ} - ∂_ν Γ^ρ_{μσ} + Γ^ρ_{μλ} Γ^λ_{νσ} - Γ^ρ_{νλ} Γ^λ_{μσ}

so that [∇_μ, ∇_ν] V^ρ = R^ρ_{σμν} V^σ for a torsion-free connection.
Slots (0, 1) form the endomorphism pair, slots (2, 3) the derivative pair.
The lowered tensor is ``R_{ρσμν} = g_{ρτ} R^τ_{σμν}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connection import ConnectionField, covariant_derivative, max_abs, partials_purity
from .expr import ZERO, differentiate, is_zero, mul, neg, sub, total, add
from .sampling import Report, Sampling
from .tensor import (
    DOWN,
    UP,
    TensorField,
    all_pairs,
    is_hybrid,
    is_pure,
    lower_index,
    pairs_report,
)

CONVENTION = "R^rho_{sigma mu nu} = d_mu G^rho_{nu sigma} - d_nu G^rho_{mu sigma} + G^rho_{mu l} G^l_{nu sigma} - G^rho_{nu l} G^l_{mu sigma}"


@dataclass(frozen=True, eq=False)
class CurvatureField:
    tensor: TensorField
    convention: str = CONVENTION

    @property
    def coords(self):
        return self.tensor.coords

    @property
    def dim(self) -> int:
        return self.tensor.dim

    @property
    def signature(self):
        return self.tensor.signature

    @property
    def components(self):
        return self.tensor.components

    def values(self, points) -> np.ndarray:
        return self.tensor.values(points)

    def at(self, point) -> np.ndarray:
        return self.tensor.at(point).array

    def lowered(self, g: TensorField) -> TensorField:
        return lower_index(self.tensor, g, 0)


def riemann(gamma: ConnectionField) -> CurvatureField:
    n = gamma.dim
    G = gamma.components
    # dG[k][ρ, ν, σ] = ∂_k Γ^ρ_{νσ}
    dG = []
    for var in gamma.coords:
        cache: dict = {}
        arr = np.empty(G.shape, dtype=object)
        for idx in np.ndindex(G.shape):
            arr[idx] = differentiate(G[idx], var, cache)
        dG.append(arr)
    comps = np.empty((n,) * 4, dtype=object)
    comps.fill(ZERO)
    for r in range(n):
        for s in range(n):
            for mu in range(n):
                for nu in range(mu + 1, n):
                    quad = [mul(G[r, mu, l], G[l, nu, s]) for l in range(n)
                            if not is_zero(G[r, mu, l]) and not is_zero(G[l, nu, s])]
                    quad += [neg(mul(G[r, nu, l], G[l, mu, s])) for l in range(n)
                             if not is_zero(G[r, nu, l]) and not is_zero(G[l, mu, s])]
                    value = add(sub(dG[mu][r, nu, s], dG[nu][r, mu, s]), total(quad))
                    comps[r, s, mu, nu] = value
                    comps[r, s, nu, mu] = neg(value)
    return CurvatureField(TensorField(gamma.coords, (UP, DOWN, DOWN, DOWN), comps))


def bianchi_residual(R: CurvatureField, points) -> float:
    """Cyclic sum over the three lower slots of R^ρ_{σμν}."""
    v = R.values(points)
    cyc = v + np.transpose(v, (0, 1, 3, 4, 2)) + np.transpose(v, (0, 1, 4, 2, 3))
    return float(np.max(np.abs(cyc))) if cyc.size else 0.0


def antisymmetry_residual(R: CurvatureField, points) -> float:
    v = R.values(points)
    return float(np.max(np.abs(v + np.swapaxes(v, 3, 4)))) if v.size else 0.0


def ricci_identity_residual(gamma: ConnectionField, f: TensorField, sampling: Sampling = Sampling(),
                            purity_tol: float = 1e-8) -> Report:
    """Check [∇_μ, ∇_ν] f^ρ_τ = R^ρ_{λμν} f^λ_τ - R^λ_{τμν} f^ρ_λ and, when ∇f ≈ 0,
    that R is pure in its (upper, first lower) pair."""
    pts = sampling.draw(gamma.dim)
    fv = f.values(pts)
    f2 = float(max(np.max(np.abs(F @ F)) for F in fv))
    if f2 > 1e-12:
        return Report("lemma2", False, f2, 1e-12, len(pts), details=[
            {"name": "precondition", "f_squared": f2, "passed": False,
             "message": "f^2 != 0 at sample points; no claim made"}])
    R = riemann(gamma)
    nf_field = covariant_derivative(f, gamma)
    nnf = covariant_derivative(nf_field, gamma).values(pts)  # [μ, ν, ρ, τ]
    Rv = R.values(pts)
    comm = nnf - np.swapaxes(nnf, 1, 2)
    rhs = (np.einsum("prlmn,plt->pmnrt", Rv, fv) - np.einsum("pltmn,prl->pmnrt", Rv, fv))
    ident = float(np.max(np.abs(comm - rhs))) if comm.size else 0.0
    nf = max_abs(nf_field, pts)
    purity = is_pure(R, 0, 1, f, sampling.with_(tol=purity_tol), pts)
    premise = nf <= sampling.tol
    scale = 1.0 + float(np.max(np.abs(Rv))) if Rv.size else 1.0
    ident_ok = ident <= sampling.tol * scale
    conclusion = purity.max_residual <= purity_tol
    details = [
        {"name": "ricci_identity", "residual": ident, "passed": ident_ok},
        {"name": "nabla_f", "residual": nf, "premise": premise},
        {"name": "curvature_purity_upper_lower", "residual": purity.max_residual,
         "tolerance": purity_tol, "passed": conclusion},
        {"name": "implication", "passed": (not premise) or conclusion},
    ]
    return Report("lemma2", ident_ok and ((not premise) or conclusion),
                  max(ident, purity.max_residual), purity_tol, len(pts), scale, details)


def metric_type(g: TensorField, f, sampling: Sampling = Sampling()) -> str:
    """'B' when g is pure, 'kahler' when hybrid, 'both'/'neither' otherwise."""
    pts = sampling.draw(g.dim)
    pure = is_pure(g, 0, 1, f, sampling, pts).passed
    hybrid = is_hybrid(g, 0, 1, f, sampling, pts).passed
    if pure and hybrid:
        return "both"
    return "B" if pure else "kahler" if hybrid else "neither"


def classify_purity(R: CurvatureField, g: TensorField, f, sampling: Sampling = Sampling(),
                    pairs=None, kind: str | None = None) -> Report:
    """Per-pair purity of the lowered curvature, with the type-specific claims.

    B-type: every pair of R_{ρσμν} plus the one-pair-implies-all consistency
    flag. Kähler-type: hybridity of R_{ρσμν} in (0, 1) and purity of
    R^ρ_{σμν} in (0, 1).
    """
    kind = kind or metric_type(g, f, sampling)
    pts = sampling.draw(R.dim)
    low = R.lowered(g)
    pairs = pairs if pairs is not None else all_pairs(4)
    lowered_pure = pairs_report("lowered_purity", low, f, sampling, pairs, points=pts)
    lowered_hybrid = pairs_report("lowered_hybridity", low, f, sampling, pairs, hybrid=True, points=pts)
    mixed = is_pure(R, 0, 1, f, sampling, pts)
    details = [
        {"name": "metric_type", "value": kind},
        {"name": "mixed_purity_upper_lower", "residual": mixed.max_residual, "passed": mixed.passed},
        {"name": "lowered_purity", "pairs": lowered_pure.details},
        {"name": "lowered_hybridity", "pairs": lowered_hybrid.details},
    ]
    if kind in ("B", "both"):
        res = [d["residual"] for d in lowered_pure.details]
        any_pure = any(d["passed"] for d in lowered_pure.details)
        all_pure = all(d["passed"] for d in lowered_pure.details)
        spread_ok = max(res) <= 10 * min(res) + 1e-9
        details.append({"name": "one_pair_implies_all", "any_pure": any_pure, "all_pure": all_pure,
                        "passed": (not any_pure) or all_pure, "spread_ok": spread_ok})
        passed = (not any_pure) or all_pure
        worst = lowered_pure.max_residual
    elif kind == "kahler":
        hyb = is_hybrid(low, 0, 1, f, sampling, pts)
        details.append({"name": "kahler_lowered_hybrid_01", "residual": hyb.max_residual, "passed": hyb.passed})
        passed = hyb.passed and mixed.passed
        worst = max(hyb.max_residual, mixed.max_residual)
    else:
        passed, worst = False, lowered_pure.max_residual
    return Report("classify_purity", passed, worst, sampling.tol, len(pts), lowered_pure.scale, details)


def theorem2_report(g: TensorField, f, sampling: Sampling = Sampling(), R: CurvatureField | None = None) -> Report:
    """Purity of ∂g and purity of the lowered curvature (all pairs) must agree."""
    from .connection import christoffel

    pts = sampling.draw(g.dim)
    dg = partials_purity(g, f, sampling, pts)
    R = R or riemann(christoffel(g, sampling))
    rp = pairs_report("lowered_purity", R.lowered(g), f, sampling, points=pts)
    agree = dg.passed == rp.passed
    return Report("theorem2", agree, max(dg.max_residual, rp.max_residual), sampling.tol, len(pts), details=[
        {"name": "partials_purity", "residual": dg.max_residual, "passed": dg.passed},
        {"name": "curvature_purity", "residual": rp.max_residual, "passed": rp.passed},
        {"name": "equivalence", "passed": agree},
    ])


# -- the G and G* tensors -------------------------------------------------------

def _g(g: np.ndarray, x, y) -> float:
    return float(np.asarray(x) @ g @ np.asarray(y))


def evaluate_G(g: np.ndarray, x, y, v, w) -> float:
    """G(x, y, v, w) = g(x, v) g(y, w) - g(x, w) g(y, v)."""
    g = np.asarray(g, dtype=float)
    return _g(g, x, v) * _g(g, y, w) - _g(g, x, w) * _g(g, y, v)


def evaluate_G_star(g: np.ndarray, f: np.ndarray, x, y, v, w) -> float:
    """G*(x, y, v, w) = G(x, fy, v, fw)."""
    f = np.asarray(f, dtype=float)
    return evaluate_G(g, x, f @ np.asarray(y), v, f @ np.asarray(w))


def G_star_short_form(g: np.ndarray, f: np.ndarray, x, y, v, w) -> float:
    """-g(x, fw) g(fy, v), equal to G* whenever g(fy, fw) = 0."""
    g, f = np.asarray(g, dtype=float), np.asarray(f, dtype=float)
    return -_g(g, x, f @ np.asarray(w)) * _g(g, f @ np.asarray(y), v)


@dataclass(frozen=True)
class HolomorphicDirection:
    in_kernel: bool
    value: float | None = None
    g_x_fx: float | None = None
    branch: str = "kernel"


def holomorphic_direction_value(g: np.ndarray, f: np.ndarray, x, tol: float = 1e-12) -> HolomorphicDirection:
    """G(x, fx, x, fx) for x outside ker f; flags the kernel case instead.

    Branch ``"B-type"`` when g(x, fx) != 0, ``"indefinite"`` when g(x, fx) = 0
    (the Kähler-type situation).
    """
    g, f = np.asarray(g, dtype=float), np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    fx = f @ x
    if float(np.max(np.abs(fx))) <= tol * (1.0 + float(np.max(np.abs(x)))):
        return HolomorphicDirection(True)
    gxfx = _g(g, x, fx)
    value = evaluate_G(g, x, fx, x, fx)
    scale = 1.0 + float(np.max(np.abs(g))) * float(np.max(np.abs(x))) ** 2
    branch = "indefinite" if abs(gxfx) <= 1e-12 * scale else "B-type"
    return HolomorphicDirection(False, value, gxfx, branch)


def corollary_g_check(g: TensorField, f, sampling: Sampling = Sampling(), quads: int = 20,
                      tol: float = 1e-12) -> Report:
    """Both G* formulas agree and G(x, fx, x, fx) = -g(x, fx)^2 at random inputs."""
    pts = sampling.draw(g.dim)
    gv = g.values(pts)
    fv = f.values(pts) if isinstance(f, TensorField) else np.broadcast_to(np.asarray(f), (len(pts),) + np.shape(f))
    rng = np.random.default_rng(sampling.seed + 1)
    star, holo = 0.0, 0.0
    branches = set()
    for k in range(quads):
        p = k % len(pts)
        x, y, v, w = rng.uniform(-1, 1, size=(4, g.dim))
        a = evaluate_G_star(gv[p], fv[p], x, y, v, w)
        b = G_star_short_form(gv[p], fv[p], x, y, v, w)
        star = max(star, abs(a - b))
        hd = holomorphic_direction_value(gv[p], fv[p], x)
        if not hd.in_kernel:
            holo = max(holo, abs(hd.value + hd.g_x_fx ** 2))
            branches.add(hd.branch)
    kernel_vec = np.zeros(g.dim)
    kernel_vec[-1] = 1.0
    kernel_flag = holomorphic_direction_value(gv[0], fv[0], kernel_vec).in_kernel
    passed = star <= tol and holo <= tol and kernel_flag
    return Report("corollary-g", passed, max(star, holo), tol, len(pts), details=[
        {"name": "G_star_formulas_agree", "residual": star, "passed": star <= tol},
        {"name": "holomorphic_value_is_minus_square", "residual": holo, "passed": holo <= tol},
        {"name": "branches", "value": sorted(branches)},
        {"name": "kernel_short_circuit", "passed": kernel_flag},
    ])
