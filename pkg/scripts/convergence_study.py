"""Step-halving study of the RK4 stepper on flat closed-form PH-curves.

    python3 scripts/convergence_study.py [--steps 0.2 0.1 0.05 0.025]

For b = 1 the exact curve (t, t^2/2) is a polynomial of degree 2, which RK4
reproduces exactly; the table shows round-off only. For b = cos(t) the exact
curve (t, 1 - cos t) exercises the truncation error and the ratio approaches 16.
"""

import argparse

import numpy as np

from nilgeom.connection import ConnectionField
from nilgeom.curves import PHCoefficients, integrate_ph_curve
from nilgeom.manifold import adapted_f

CASES = {
    "1": lambda t: np.array([t, t * t / 2]),
    "cos(t)": lambda t: np.array([t, 1 - np.cos(t)]),
}


def max_error(b: str, step: float) -> float:
    C = ("z1", "z2")
    states = integrate_ph_curve(ConnectionField.zero(C), adapted_f(1, 0, C), [0, 0], [1, 0],
                                PHCoefficients.from_strings("0", b), 1.0, step)
    return max(float(np.max(np.abs(s.z - CASES[b](s.t)))) for s in states)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    args = ap.parse_args()
    for b in CASES:
        print(f"b = {b}")
        print(f"  {'step':>8} {'max error':>12} {'ratio':>8}")
        prev = None
        for h in args.steps:
            err = max_error(b, h)
            ratio = f"{prev / err:8.2f}" if prev is not None and err > 0 else " " * 8
            print(f"  {h:8.4f} {err:12.3e} {ratio}")
            prev = err


if __name__ == "__main__":
    main()
