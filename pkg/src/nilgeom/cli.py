"""Command-line entry point.

    nilgeom verify theorem4 --manifest curved-B
    nilgeom verify all --seed 42 --out report.json
    nilgeom geodesic --manifest lifted-curved --csv traj.csv

Exit codes: 0 passed, 1 check failed, 2 manifest or usage error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .connection import christoffel, complete_lift, connection_difference, connection_purity, metricity_residual
from .curvature import antisymmetry_residual, bianchi_residual, metric_type, riemann
from .curves import (
    CurveIntegrationError,
    DegenerateCurveError,
    PHCoefficients,
    ReparametrizationError,
    build_surface,
    classify_curve,
    integrate_geodesic,
    integrate_ph_curve,
    parallel_transport,
    reparametrize_surface,
    surface_holomorphic_check,
)
from .expr import ExprDomainError, ExpressionError, to_text
from .manifest import BUILTINS, SCHEMA_VERSION, Manifest, ManifestError, load
from .manifold import SingularJacobianError, TransitionMap, lift_transition
from .sampling import Report, combine
from .tensor import SingularMetricError, pairs_report
from .verify import CLAIMS, Context, verify_all

DEFAULT_MANIFEST = "curved-B"
NUMERICAL = (SingularMetricError, SingularJacobianError, ExprDomainError, CurveIntegrationError,
             DegenerateCurveError, np.linalg.LinAlgError, ZeroDivisionError, OverflowError)


def _sampling(args, manifest: Manifest):
    s = manifest.sampling
    changes = {k: v for k, v in (("seed", args.seed), ("points", args.points), ("tol", args.tol)) if v is not None}
    return s.with_(**changes)


def _envelope(manifest: Manifest, sampling, body: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "manifest": manifest.name,
        "manifest_digest": manifest.digest,
        "seed": sampling.seed,
        **body,
    }


def _write_csv(path: str, states) -> None:
    dim = len(states[0].z)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"z{k + 1}" for k in range(dim)] + [f"zdot{k + 1}" for k in range(dim)])
        for s in states:
            w.writerow([repr(float(s.t))] + [repr(float(x)) for x in s.z] + [repr(float(x)) for x in s.zdot])


# -- subcommands --------------------------------------------------------------------

def cmd_validate(args, M, s):
    rep = M.chart.validate(s)
    rep.details.append({"name": "metric_type", "value": metric_type(M.metric, M.f, s)})
    return rep, {}


def cmd_christoffel(args, M, s):
    gamma = christoffel(M.metric, s)
    rep = metricity_residual(M.metric, gamma, s)
    rep.check = "christoffel"
    comps = {}
    for (a, b, c), e in np.ndenumerate(gamma.components):
        if b <= c and to_text(e) != "0":
            comps[f"{a + 1},{b + 1},{c + 1}"] = to_text(e)
    return rep, {"components": comps}


def cmd_curvature(args, M, s):
    R = riemann(christoffel(M.metric, s))
    pts = s.draw(M.chart.dim)
    bianchi = bianchi_residual(R, pts)
    anti = antisymmetry_residual(R, pts)
    worst = max(bianchi, anti)
    scale = 1.0 + float(np.max(np.abs(R.values(pts))))
    rep = Report("curvature", worst <= s.tol * scale, worst, s.tol, len(pts), scale, details=[
        {"name": "first_bianchi", "residual": bianchi, "passed": bianchi <= s.tol * scale},
        {"name": "antisymmetry", "residual": anti, "passed": anti <= s.tol * scale},
    ])
    return rep, {"convention": R.convention, "max_abs": scale - 1.0}


def cmd_purity(args, M, s):
    pairs = [tuple(p) for p in args.pair] if args.pair else None
    if args.target == "metric":
        T = M.metric
    elif args.target == "connection":
        T = christoffel(M.metric, s)
        if pairs is None:
            return connection_purity(T, M.f, s), {}
    else:
        R = riemann(christoffel(M.metric, s))
        T = R.lowered(M.metric) if args.lowered else R
    rank = len(T.signature)
    for p in pairs or []:
        if not (0 <= p[0] < rank and 0 <= p[1] < rank and p[0] != p[1]):
            raise ManifestError("arguments", f"invalid slot pair {p} for a rank-{rank} tensor")
    rep = pairs_report(f"{args.target}_{'hybridity' if args.hybrid else 'purity'}", T, M.f, s, pairs,
                       hybrid=args.hybrid)
    return rep, {}


def cmd_lift(args, M, s):
    parts = []
    if args.phi:
        t = TransitionMap.from_strings(M.n, M.m, args.phi, args.theta or [], M.coords)
        parts.append(lift_transition(t, s).report)
    if M.base_metric is not None:
        lifted = complete_lift(christoffel(M.base_metric, None), M.coords[M.n:])
        direct = christoffel(M.metric, s)
        pts = s.draw(M.chart.dim)
        diff = connection_difference(lifted, direct, pts)
        parts.append(Report("lift_matches_levi_civita", diff <= s.tol, diff, s.tol, len(pts)))
        pur = connection_purity(lifted, M.f, s)
        pur.check = "lift_purity"
        parts.append(pur)
    if not parts:
        raise ManifestError("base", "lift needs a base section or --phi expressions")
    return combine("lift", parts), {}


def cmd_verify(args, M, s):
    ctx = Context(M, s, args.h)
    rep = ctx.check(args.claim)
    return rep, {}


def _geodesic(M, s):
    c = M.curve
    return integrate_geodesic(christoffel(M.metric, s), c.z0, c.v0, c.t_end, c.step, M.metric)


def cmd_geodesic(args, M, s):
    states = _geodesic(M, s)
    energy = np.array([st.energy for st in states], dtype=float)
    drift = float(np.max(energy) - np.min(energy))
    cl = classify_curve(christoffel(M.metric, None), M.f, states)
    rep = cl.report()
    rep.check = "geodesic"
    rep.details.insert(0, {"name": "energy_drift", "residual": drift, "passed": drift <= 1e-6})
    rep.passed = rep.passed and drift <= 1e-6
    return rep, {"final": {"t": states[-1].t, "z": states[-1].z, "zdot": states[-1].zdot}}, states


def cmd_ph_curve(args, M, s):
    c = M.curve
    gamma = christoffel(M.metric, s)
    states = integrate_ph_curve(gamma, M.f, c.z0, c.v0, PHCoefficients.from_strings(c.a, c.b), c.t_end, c.step)
    rep = classify_curve(gamma, M.f, states).report()
    rep.check = "ph-curve"
    return rep, {"a": c.a, "b": c.b, "final": {"t": states[-1].t, "z": states[-1].z, "zdot": states[-1].zdot}}, states


def cmd_transport(args, M, s):
    gamma = christoffel(M.metric, s)
    states = _geodesic(M, s)
    w0 = np.array(args.w0, dtype=float) if args.w0 else np.array(M.curve.v0[::-1], dtype=float)
    if w0.shape != (M.chart.dim,):
        raise ManifestError("arguments", f"--w0 needs {M.chart.dim} components")
    ws = parallel_transport(gamma, states, w0)
    vs = parallel_transport(gamma, states, states[0].zdot)
    g = M.metric.values(np.array([st.z for st in states]))
    norms = np.einsum("ka,kab,kb->k", np.array(ws), g, np.array(ws))
    drift = float(np.max(norms) - np.min(norms))
    self_res = float(max(np.max(np.abs(v - st.zdot)) for v, st in zip(vs, states)))
    rep = Report("transport", drift <= 1e-6 and self_res <= 1e-6, max(drift, self_res), 1e-6, len(states),
                 details=[{"name": "norm_drift", "residual": drift, "passed": drift <= 1e-6},
                          {"name": "velocity_self_transport", "residual": self_res, "passed": self_res <= 1e-6}])
    return rep, {"w_final": ws[-1]}


def cmd_surface(args, M, s):
    base = args.base_curve or M.surface.base_curve or ["u"] * M.n
    if len(base) != M.n:
        raise ManifestError("surface.base_curve", f"expected {M.n} expressions in u")
    S = build_surface(base)
    rep = surface_holomorphic_check(S, s)
    extra = {"fiber": [to_text(e) for e in S.fiber]}
    h = args.reparam_h or M.surface.h
    t = args.reparam_t or M.surface.t
    try:
        S2, rep2 = reparametrize_surface(S, h, t, s)
        extra["reparametrized"] = {"base": [to_text(e) for e in S2.base], "fiber": [to_text(e) for e in S2.fiber]}
    except ReparametrizationError as exc:
        rep2 = Report("reparametrize_surface", False, exc.residual, s.tol, s.points,
                      details=[{"name": "error", "message": str(exc)}])
    return combine("surface", [rep, rep2]), extra


COMMANDS = {
    "validate": cmd_validate, "christoffel": cmd_christoffel, "curvature": cmd_curvature,
    "purity": cmd_purity, "lift": cmd_lift, "verify": cmd_verify, "geodesic": cmd_geodesic,
    "ph-curve": cmd_ph_curve, "transport": cmd_transport, "surface": cmd_surface,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help=f"manifest path or built-in name ({', '.join(BUILTINS)})")
    common.add_argument("--seed", type=int)
    common.add_argument("--points", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--csv", help="write the trajectory as CSV (geodesic, ph-curve)")

    p = argparse.ArgumentParser(prog="nilgeom", description="Tensor checks on charts with a nilpotent structure.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("validate", "christoffel", "curvature", "geodesic", "ph-curve"):
        sub.add_parser(name, parents=[common])
    pur = sub.add_parser("purity", parents=[common])
    pur.add_argument("--target", choices=["metric", "connection", "curvature"], default="metric")
    pur.add_argument("--pair", type=int, nargs=2, action="append", metavar=("A", "B"),
                     help="0-based slot pair; repeatable (default: every pair)")
    pur.add_argument("--hybrid", action="store_true", help="test hybridity instead of purity")
    pur.add_argument("--lowered", action="store_true", help="curvature target: use R with all indices down")
    lift = sub.add_parser("lift", parents=[common])
    lift.add_argument("--phi", nargs="+", help="base transition functions in the source coordinates")
    lift.add_argument("--theta", nargs="+", help="extra-fiber transition functions")
    ver = sub.add_parser("verify", parents=[common])
    ver.add_argument("claim", choices=CLAIMS + ["all"])
    ver.add_argument("--h", help="conformal factor for theorem5")
    tr = sub.add_parser("transport", parents=[common])
    tr.add_argument("--w0", type=float, nargs="+", help="initial vector (default: reversed v0)")
    sf = sub.add_parser("surface", parents=[common])
    sf.add_argument("--base-curve", nargs="+", help="base curve z^i(u)")
    sf.add_argument("--reparam-h", help="new parameter h(u)")
    sf.add_argument("--reparam-t", help="new fiber parameter t(u, v)")
    return p


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _verify_all(args) -> int:
    names = [args.manifest] if args.manifest else list(BUILTINS)
    runs = []
    for name in names:
        M = load(name)
        s = _sampling(args, M)
        reports = verify_all(M, s, args.h)
        runs.append(_envelope(M, s, {"passed": all(r.passed for r in reports),
                                     "checks": [r.to_dict() for r in reports]}))
    passed = all(r["passed"] for r in runs)
    _emit({"schema_version": SCHEMA_VERSION, "tool_version": __version__, "passed": passed, "runs": runs}, args.out)
    return 0 if passed else 1


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify" and args.claim == "all":
            return _verify_all(args)
        M = load(args.manifest or DEFAULT_MANIFEST)
        s = _sampling(args, M)
        out = COMMANDS[args.command](args, M, s)
        rep, extra = out[0], out[1]
        if len(out) > 2 and args.csv:
            _write_csv(args.csv, out[2])
        _emit(_envelope(M, s, {**rep.to_dict(), **_plain(extra)}), args.out)
        return 0 if rep.passed else 1
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except ExpressionError as exc:
        print(f"expression error: {exc}", file=sys.stderr)
        return 2


def _plain(obj):
    return json.loads(json.dumps(obj, default=_json_default))


def main() -> None:
    sys.exit(run())
