"""YAML manifests describing a chart, its metric and the checks to run.

A manifest is a mapping with named sections::

    schema_version: 1
    name: curved-B
    manifold: {n: 1, m: 0}            # coords default to z1..z(2n+m)
    metric: [["z1^2+1", "1"], ["1", "0"]]
    base: {metric: [[...]]}           # alternative to metric: complete lift (m = 0)
    structure: [[...]]                # optional f, adapted form by default
    conformal: {h: "exp(z1)"}
    form: {q: ["0", "1"]}
    sampling: {points: 20, box: [-1, 1], seed: 42, tol: 1.0e-9}
    curve: {z0: [...], v0: [...], t_end: 1.0, step: 1.0e-3, a: "0", b: "1"}
    surface: {base_curve: ["u"], h: "u^3+u", t: "(3*u^2+1)*v"}

Errors are reported as :class:`ManifestError` naming the section and, for
expression strings, the character position.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .connection import complete_lift_metric, one_form
from .expr import Expression, ExpressionSyntaxError, parse, to_text
from .manifold import ChartManifold, adapted_f_array, compatible_metric_basis, default_coords
from .sampling import Sampling
from .tensor import DOWN, UP, TensorField

SCHEMA_VERSION = 1
SECTIONS = {"schema_version", "name", "manifold", "metric", "base", "structure", "conformal",
            "form", "sampling", "curve", "surface"}


class ManifestError(ValueError):
    def __init__(self, section: str, message: str, position: int | None = None):
        self.section = section
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"[{section}] {message}{where}")


@dataclass(frozen=True)
class CurveConfig:
    z0: tuple[float, ...]
    v0: tuple[float, ...]
    t_end: float = 1.0
    step: float = 1e-3
    a: str = "0"
    b: str = "0"


@dataclass(frozen=True)
class SurfaceConfig:
    base_curve: tuple[str, ...] | None = None
    h: str = "u^3+u"
    t: str = "(3*u^2+1)*v"


@dataclass(frozen=True, eq=False)
class Manifest:
    name: str
    chart: ChartManifold
    base_metric: TensorField | None
    h: Expression | None
    q: TensorField | None
    sampling: Sampling
    curve: CurveConfig
    surface: SurfaceConfig
    digest: str
    raw: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.chart.n

    @property
    def m(self) -> int:
        return self.chart.m

    @property
    def coords(self) -> tuple[str, ...]:
        return self.chart.coords

    @property
    def metric(self) -> TensorField:
        return self.chart.metric

    @property
    def f(self) -> TensorField:
        return self.chart.f


def _expr(text, section: str, names) -> Expression:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text)) if isinstance(text, float) else str(text)
    if not isinstance(text, str):
        raise ManifestError(section, f"expected an expression string, got {type(text).__name__}")
    try:
        return parse(text, names)
    except ExpressionSyntaxError as exc:
        raise ManifestError(section, exc.message, exc.position) from exc


def _matrix(rows, size: int, section: str, names, signature) -> TensorField:
    if not isinstance(rows, list) or len(rows) != size:
        got = len(rows) if isinstance(rows, list) else type(rows).__name__
        raise ManifestError(section, f"expected {size} rows, got {got}")
    comps = np.empty((size, size), dtype=object)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != size:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise ManifestError(f"{section}[{i}]", f"expected {size} entries, got {got} (matrix must be square)")
        for j, entry in enumerate(row):
            comps[i, j] = _expr(entry, f"{section}[{i}][{j}]", names)
    return TensorField(tuple(names), signature, comps)


def _floats(values, size: int, section: str) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ManifestError(section, f"expected {size} numbers") from exc
    if len(out) != size:
        raise ManifestError(section, f"expected {size} numbers, got {len(out)}")
    return out


def _mapping(data: dict, key: str) -> dict:
    value = data.get(key) or {}
    if not isinstance(value, dict):
        raise ManifestError(key, "section must be a mapping")
    return value


def default_curve(n: int, m: int) -> CurveConfig:
    dim = 2 * n + m
    z0 = tuple(round(0.1 * (k + 1), 10) for k in range(dim))
    v0 = tuple(1.0 if k < n else 0.5 for k in range(dim))
    return CurveConfig(z0, v0)


def from_dict(data: Any, digest: str = "") -> Manifest:
    """Validate a parsed manifest mapping and build the chart objects."""
    if not isinstance(data, dict):
        raise ManifestError("manifest", "top level must be a mapping")
    unknown = sorted(set(data) - SECTIONS)
    if unknown:
        raise ManifestError(unknown[0], "unknown section")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ManifestError("schema_version", f"unsupported schema version {version!r}")

    man = _mapping(data, "manifold")
    try:
        n, m = int(man.get("n", 0)), int(man.get("m", 0))
    except (TypeError, ValueError) as exc:
        raise ManifestError("manifold", "n and m must be integers") from exc
    if n < 1 or m < 0:
        raise ManifestError("manifold", "need n >= 1 and m >= 0")
    dim = 2 * n + m
    coords = tuple(man.get("coords") or default_coords(dim))
    if len(coords) != dim or len(set(coords)) != dim:
        raise ManifestError("manifold", f"need {dim} distinct coordinate names")

    base_metric = None
    if "metric" in data and "base" in data:
        raise ManifestError("metric", "give either metric or base, not both")
    if "base" in data:
        if m != 0:
            raise ManifestError("base", "complete-lift manifests require m = 0")
        base = _mapping(data, "base")
        base_metric = _matrix(base.get("metric"), n, "base.metric", coords[:n], (DOWN, DOWN))
        metric = complete_lift_metric(base_metric, coords[n:])
    elif "metric" in data:
        metric = _matrix(data["metric"], dim, "metric", coords, (DOWN, DOWN))
    else:
        raise ManifestError("metric", "missing metric (or base) section")

    f = None
    if data.get("structure") is not None:
        f = _matrix(data["structure"], dim, "structure", coords, (UP, DOWN))
    try:
        chart = ChartManifold(n, m, metric, f, str(data.get("name", "")))
    except ValueError as exc:
        raise ManifestError("manifold", str(exc)) from exc

    conf = _mapping(data, "conformal")
    h = _expr(conf["h"], "conformal.h", coords) if "h" in conf else None

    form = _mapping(data, "form")
    q = None
    if "q" in form:
        comps = form["q"]
        if not isinstance(comps, list) or len(comps) != dim:
            raise ManifestError("form.q", f"expected {dim} components")
        q = one_form([_expr(c, f"form.q[{i}]", coords) for i, c in enumerate(comps)], coords)

    s = _mapping(data, "sampling")
    box = s.get("box", [-1.0, 1.0])
    try:
        sampling = Sampling(int(s.get("points", 20)), float(box[0]), float(box[1]),
                            int(s.get("seed", 42)), float(s.get("tol", 1e-9)))
    except (TypeError, ValueError, IndexError) as exc:
        raise ManifestError("sampling", "points, box, seed and tol must be numeric") from exc
    if sampling.points < 1 or not sampling.low < sampling.high:
        raise ManifestError("sampling", "need points >= 1 and box low < high")

    c = _mapping(data, "curve")
    dflt = default_curve(n, m)
    curve = CurveConfig(
        _floats(c["z0"], dim, "curve.z0") if "z0" in c else dflt.z0,
        _floats(c["v0"], dim, "curve.v0") if "v0" in c else dflt.v0,
        float(c.get("t_end", dflt.t_end)), float(c.get("step", dflt.step)),
        str(c.get("a", "0")), str(c.get("b", "0")),
    )
    for key in ("a", "b"):
        _expr(getattr(curve, key), f"curve.{key}", ["t"])
    if curve.step <= 0 or curve.t_end <= 0:
        raise ManifestError("curve", "t_end and step must be positive")

    sf = _mapping(data, "surface")
    bc = sf.get("base_curve")
    if bc is not None:
        if not isinstance(bc, list) or len(bc) != n:
            raise ManifestError("surface.base_curve", f"expected {n} expressions in u")
        for i, e in enumerate(bc):
            _expr(e, f"surface.base_curve[{i}]", ["u"])
        bc = tuple(str(e) for e in bc)
    surface = SurfaceConfig(bc, str(sf.get("h", SurfaceConfig.h)), str(sf.get("t", SurfaceConfig.t)))
    _expr(surface.h, "surface.h", ["u"])
    _expr(surface.t, "surface.t", ["u", "v"])

    return Manifest(str(data.get("name", "")), chart, base_metric, h, q, sampling, curve, surface,
                    digest, data)


def loads(text: str) -> Manifest:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ManifestError("manifest", f"YAML error: {getattr(exc, 'problem', exc)}",
                            None if mark is None else mark.index) from exc
    return from_dict(data, hashlib.sha256(text.encode()).hexdigest())


def load(path) -> Manifest:
    """Load a manifest file, or a built-in when ``path`` names one."""
    if str(path) in BUILTINS:
        return builtin(str(path))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ManifestError("manifest", f"cannot read {path}: {exc.strerror}") from exc
    return loads(text)


# -- built-in manifolds ---------------------------------------------------------

def _kahler4_metric() -> list[list[str]]:
    """Hybrid n=2 metric assembled from the constant hybrid basis of the adapted f.

    Basis elements 0 and 2 are the diagonal base-block entries and element 3
    is the antisymmetric base/fiber coupling; element 2 gets a z1-dependent
    coefficient so the metric is curved.
    """
    basis = compatible_metric_basis(adapted_f_array(2), "hybrid")
    terms = [(basis[0], "1"), (basis[2], "1+z1^2"), (basis[3], "1")]
    coords = default_coords(4)
    rows = []
    for i in range(4):
        row = []
        for j in range(4):
            parts = [f"{'-' if M[i, j] < 0 else '+'}({c})" for M, c in terms if M[i, j] != 0]
            row.append(to_text(parse("".join(parts).lstrip("+"), coords)) if parts else "0")
        rows.append(row)
    return rows


def _builtin_texts() -> dict[str, str]:
    k4 = yaml.safe_dump({"schema_version": 1, "name": "kahler-4", "manifold": {"n": 2, "m": 0},
                         "metric": _kahler4_metric()}, default_flow_style=None, sort_keys=False)
    return {
        "flat-B": """schema_version: 1
name: flat-B
manifold: {n: 1, m: 0}
metric: [["0", "1"], ["1", "0"]]
surface: {base_curve: ["u"]}
""",
        "curved-B": """schema_version: 1
name: curved-B
manifold: {n: 1, m: 0}
metric: [["z1^2+1", "1"], ["1", "0"]]
surface: {base_curve: ["u"]}
""",
        "lifted-curved": """schema_version: 1
name: lifted-curved
manifold: {n: 2, m: 0}
base:
  metric: [["1", "0"], ["0", "1+z1^2"]]
curve: {b: "1"}
""",
        "kahler-4": k4,
    }


BUILTINS = _builtin_texts()


def builtin(name: str) -> Manifest:
    if name not in BUILTINS:
        raise ManifestError("manifest", f"no built-in manifold named {name!r}")
    return loads(BUILTINS[name])


def builtin_manifolds() -> list[Manifest]:
    return [builtin(name) for name in BUILTINS]
