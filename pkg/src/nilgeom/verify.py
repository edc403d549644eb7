"""One report per named claim, evaluated on a loaded manifest.

Every check returns a :class:`Report`. Claims with a premise pass when the
premise fails (the report records ``applicable: false``); they fail only when
the premise holds and the conclusion does not.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .connection import (
    ConnectionField,
    christoffel,
    conformal_purity_scan,
    connection_difference,
    connection_purity,
    covariant_derivative,
    max_abs,
    metric_plus_tilde,
    nabla_f_check,
    one_form,
    partials_purity,
)
from .curvature import (
    classify_purity,
    corollary_g_check,
    metric_type,
    ricci_identity_residual,
    riemann,
    theorem2_report,
)
from .curves import (
    PHCoefficients,
    base_samples_from_states,
    build_surface,
    classify_curve,
    integrate_geodesic,
    integrate_ph_curve,
    reparametrize_surface,
    theorem6_check,
    theorem7_ph_transform,
)
from .expr import ZERO, Num, parse, substitute
from .manifest import Manifest
from .sampling import Report, Sampling
from .tensor import TensorField, is_hybrid, is_pure

CLAIMS = ["lemma1", "lemma2", "assertion1", "theorem1", "theorem2", "theorem3", "theorem4",
          "theorem5", "corollary-g", "assertion2", "assertion3", "assertion4", "assertion5",
          "theorem6", "theorem7"]


def _skip(check: str, reason: str) -> Report:
    return Report(check, True, 0.0, 0.0, 0, details=[{"name": "applicable", "value": False, "reason": reason}])


class Context:
    """Lazily computed objects shared by the checks for one manifest."""

    def __init__(self, manifest: Manifest, sampling: Sampling | None = None, h=None):
        self.manifest = manifest
        self.sampling = sampling or manifest.sampling
        self.h = h

    def check(self, name: str) -> Report:
        return CHECKS[name](self)

    @property
    def g(self) -> TensorField:
        return self.manifest.metric

    @property
    def f(self) -> TensorField:
        return self.manifest.f

    @cached_property
    def points(self) -> np.ndarray:
        return self.sampling.draw(self.manifest.chart.dim)

    @cached_property
    def gamma(self) -> ConnectionField:
        return christoffel(self.g, self.sampling)

    @cached_property
    def R(self):
        return riemann(self.gamma)

    @cached_property
    def kind(self) -> str:
        return metric_type(self.g, self.f, self.sampling)

    @cached_property
    def f_constant(self) -> bool:
        return self.manifest.chart.f_is_constant()

    @cached_property
    def nabla_f(self) -> float:
        return max_abs(covariant_derivative(self.f, self.gamma), self.points)

    @property
    def b_type(self) -> bool:
        return self.kind in ("B", "both")

    @cached_property
    def q(self) -> TensorField:
        if self.manifest.q is not None:
            return self.manifest.q
        dim = self.manifest.chart.dim
        return one_form(["0"] * (dim - 1) + ["1"], self.manifest.coords)

    @cached_property
    def base_connection(self) -> ConnectionField:
        """Base block of Γ on the fiber-zero section (exact for complete lifts)."""
        n = self.manifest.n
        coords = self.manifest.coords
        zero = {c: ZERO for c in coords[n:]}
        comps = np.empty((n, n, n), dtype=object)
        for idx in np.ndindex(n, n, n):
            comps[idx] = substitute(self.gamma.components[idx], zero)
        return ConnectionField(TensorField(coords[:n], self.gamma.signature, comps), self.gamma.symmetric)


def _needs_constant_f(ctx: Context, check: str) -> Report | None:
    if not ctx.f_constant:
        return Report(check, False, float("inf"), 0.0, 0, details=[
            {"name": "f_constant", "passed": False,
             "message": "only lemma1 is defined for non-constant f; rewrite the chart in the adapted basis"}])
    return None


def lemma1(ctx: Context) -> Report:
    rep = nabla_f_check(ctx.gamma, ctx.f, ctx.sampling)
    rep.details.append({"name": "connection_purity", **connection_purity(ctx.gamma, ctx.f, ctx.sampling).to_dict()})
    return rep


def lemma2(ctx: Context) -> Report:
    return _needs_constant_f(ctx, "lemma2") or ricci_identity_residual(ctx.gamma, ctx.f, ctx.sampling, 1e-8)


def assertion1(ctx: Context) -> Report:
    early = _needs_constant_f(ctx, "assertion1")
    if early:
        return early
    s = ctx.sampling.with_(tol=1e-8)
    if ctx.kind == "neither":
        return _skip("assertion1", "metric is neither pure nor hybrid")
    premise = ctx.nabla_f <= ctx.sampling.tol
    low = ctx.R.lowered(ctx.g)
    mixed = is_pure(ctx.R, 0, 1, ctx.f, s, ctx.points)
    if ctx.b_type:
        lowered = is_pure(low, 0, 1, ctx.f, s, ctx.points)
    else:
        lowered = is_hybrid(low, 0, 1, ctx.f, s, ctx.points)
    conclusion = mixed.passed and lowered.passed
    return Report("assertion1", (not premise) or conclusion, max(mixed.max_residual, lowered.max_residual),
                  1e-8, len(ctx.points), details=[
                      {"name": "metric_type", "value": ctx.kind},
                      {"name": "nabla_f", "residual": ctx.nabla_f, "premise": premise},
                      {"name": "mixed_purity_upper_lower", "residual": mixed.max_residual, "passed": mixed.passed},
                      {"name": "lowered_pure" if ctx.b_type else "lowered_hybrid",
                       "residual": lowered.max_residual, "passed": lowered.passed},
                  ])


def theorem1(ctx: Context) -> Report:
    early = _needs_constant_f(ctx, "theorem1")
    if early:
        return early
    if not ctx.b_type:
        return _skip("theorem1", f"metric type is {ctx.kind}, claim concerns B-type")
    rep = classify_purity(ctx.R, ctx.g, ctx.f, ctx.sampling.with_(tol=1e-8), kind="B")
    rep.check = "theorem1"
    return rep


def theorem2(ctx: Context) -> Report:
    early = _needs_constant_f(ctx, "theorem2")
    if early:
        return early
    if not ctx.b_type:
        return _skip("theorem2", f"metric type is {ctx.kind}, claim concerns B-type")
    return theorem2_report(ctx.g, ctx.f, ctx.sampling.with_(tol=1e-8), ctx.R)


def theorem3(ctx: Context) -> Report:
    early = _needs_constant_f(ctx, "theorem3")
    if early:
        return early
    if not ctx.b_type:
        return _skip("theorem3", f"metric type is {ctx.kind}, claim concerns B-type")
    cp = connection_purity(ctx.gamma, ctx.f, ctx.sampling)
    dg = partials_purity(ctx.g, ctx.f, ctx.sampling, ctx.points)
    agree = cp.passed == dg.passed
    return Report("theorem3", agree, max(cp.max_residual, dg.max_residual), ctx.sampling.tol,
                  len(ctx.points), details=[
                      {"name": "connection_purity", "residual": cp.max_residual, "passed": cp.passed},
                      {"name": "partials_purity", "residual": dg.max_residual, "passed": dg.passed},
                      {"name": "equivalence", "passed": agree},
                  ])


def theorem4(ctx: Context) -> Report:
    early = _needs_constant_f(ctx, "theorem4")
    if early:
        return early
    if not ctx.b_type:
        return _skip("theorem4", f"metric type is {ctx.kind}; g + g~ is only symmetric for B-type")
    other = christoffel(metric_plus_tilde(ctx.g, ctx.f, ctx.sampling), None)
    diff = connection_difference(ctx.gamma, other, ctx.points)
    return Report("theorem4", diff <= ctx.sampling.tol, diff, ctx.sampling.tol, len(ctx.points))


def theorem5(ctx: Context) -> Report:
    """With an explicit h: is h·g still a B-manifold? Without: constant h keeps it, exp(z1) breaks it."""
    early = _needs_constant_f(ctx, "theorem5")
    if early:
        return early
    if not ctx.b_type:
        return _skip("theorem5", f"metric type is {ctx.kind}, claim concerns B-type")
    tol = 1e-10
    s = ctx.sampling.with_(tol=tol)
    if ctx.h is not None:
        h = parse(ctx.h, ctx.manifest.coords) if isinstance(ctx.h, str) else ctx.h
        rep = conformal_purity_scan(ctx.g, h, ctx.f, s)
        rep.check = "theorem5"
        return rep
    if ctx.manifest.h is not None:
        return Context(ctx.manifest, ctx.sampling, ctx.manifest.h).check("theorem5")
    const = conformal_purity_scan(ctx.g, Num(7.5), ctx.f, s)
    varying = conformal_purity_scan(ctx.g, parse(f"exp({ctx.manifest.coords[0]})", ctx.manifest.coords),
                                    ctx.f, s)
    base_pure = partials_purity(ctx.g, ctx.f, s, ctx.points).passed
    # exp(z1) must break purity of ∂(hg) whenever ∂g was pure to begin with
    breaks = varying.max_residual >= 1e-3
    passed = const.passed and ((not base_pure) or breaks)
    return Report("theorem5", passed, const.max_residual, tol, len(ctx.points), details=[
        {"name": "constant_h", "h": "7.5", "residual": const.max_residual, "passed": const.passed},
        {"name": "varying_h", "h": f"exp({ctx.manifest.coords[0]})", "residual": varying.max_residual,
         "expected_at_least": 1e-3, "passed": (not base_pure) or breaks},
    ])


def corollary_g(ctx: Context) -> Report:
    return _needs_constant_f(ctx, "corollary-g") or corollary_g_check(ctx.g, ctx.f, ctx.sampling)


def _kernel_velocity(ctx: Context) -> np.ndarray:
    n = ctx.manifest.n
    v = np.array(ctx.manifest.curve.v0, dtype=float)
    v[:n] = 0.0
    if not np.any(v):
        v[n:] = 1.0
    return v


def _geodesic(ctx: Context, v0=None):
    c = ctx.manifest.curve
    return integrate_geodesic(ctx.gamma, c.z0, c.v0 if v0 is None else v0, c.t_end, c.step, ctx.g)


def _curve_report(check: str, ctx: Context, states, verdict: str) -> Report:
    cl = classify_curve(ctx.gamma, ctx.f, states)
    rep = cl.report()
    v = cl.verdicts[verdict]
    rep.check = check
    rep.passed = (not v["applicable"]) or v["holds"]
    rep.details.insert(0, {"name": "applicable", "value": v["applicable"]})
    return rep


def assertion2(ctx: Context) -> Report:
    return _needs_constant_f(ctx, "assertion2") or _curve_report("assertion2", ctx, _geodesic(ctx), "assertion2")


def assertion3(ctx: Context) -> Report:
    early = _needs_constant_f(ctx, "assertion3")
    if early:
        return early
    return _curve_report("assertion3", ctx, _geodesic(ctx, _kernel_velocity(ctx)), "assertion3")


def assertion4(ctx: Context) -> Report:
    early = _needs_constant_f(ctx, "assertion4")
    if early:
        return early
    c = ctx.manifest.curve
    states = integrate_ph_curve(ctx.gamma, ctx.f, c.z0, _kernel_velocity(ctx),
                                PHCoefficients.from_strings("sin(t)", "1"), c.t_end, c.step)
    return _curve_report("assertion4", ctx, states, "assertion4")


def _base_curve(ctx: Context) -> tuple[str, ...]:
    bc = ctx.manifest.surface.base_curve
    return bc if bc is not None else tuple("u" if i == 0 else f"u^{i + 1}" for i in range(ctx.manifest.n))


def assertion5(ctx: Context) -> Report:
    S = build_surface(_base_curve(ctx))
    sf = ctx.manifest.surface
    _, rep = reparametrize_surface(S, sf.h, sf.t, ctx.sampling)
    rep.check = "assertion5"
    return rep


def theorem6(ctx: Context) -> Report:
    early = _needs_constant_f(ctx, "theorem6")
    if early:
        return early
    if ctx.manifest.m != 0:
        return _skip("theorem6", "surfaces are defined for m = 0 charts")
    n = ctx.manifest.n
    c = ctx.manifest.curve
    states = integrate_geodesic(ctx.base_connection, c.z0[:n], c.v0[:n], c.t_end, c.step)
    stride = max(1, (len(states) - 1) // 100)
    base = base_samples_from_states(states[::stride], ctx.gamma)
    v_values = ctx.sampling.draw(1)[:, 0]
    return theorem6_check(base, ctx.gamma, ctx.f, v_values)


def theorem7(ctx: Context) -> Report:
    early = _needs_constant_f(ctx, "theorem7")
    if early:
        return early
    c = ctx.manifest.curve
    states = integrate_ph_curve(ctx.gamma, ctx.f, c.z0, c.v0, PHCoefficients.from_strings(c.a, c.b),
                                c.t_end, c.step)
    return theorem7_ph_transform(ctx.gamma, ctx.q, ctx.f, states)


CHECKS = {
    "lemma1": lemma1, "lemma2": lemma2, "assertion1": assertion1, "theorem1": theorem1,
    "theorem2": theorem2, "theorem3": theorem3, "theorem4": theorem4, "theorem5": theorem5,
    "corollary-g": corollary_g, "assertion2": assertion2, "assertion3": assertion3,
    "assertion4": assertion4, "assertion5": assertion5, "theorem6": theorem6, "theorem7": theorem7,
}


def verify_all(manifest: Manifest, sampling: Sampling | None = None, h=None) -> list[Report]:
    ctx = Context(manifest, sampling, h)
    return [ctx.check(name) for name in CLAIMS]
