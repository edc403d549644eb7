"""Run every verify check on every built-in manifest and print a verdict table.

    python3 scripts/verify_builtins.py [--seed 42]

The full JSON report is available through ``nilgeom verify all --out FILE``.
"""

import argparse

from nilgeom.manifest import builtin_manifolds
from nilgeom.sampling import Sampling
from nilgeom.verify import CLAIMS, verify_all


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    manifolds = builtin_manifolds()
    rows = {M.name: {r.check: r for r in verify_all(M, M.sampling.with_(seed=args.seed))} for M in manifolds}
    width = max(len(c) for c in CLAIMS)
    print(" " * width + "".join(f"{M.name:>15}" for M in manifolds))
    ok = True
    for claim in CLAIMS:
        cells = []
        for M in manifolds:
            r = rows[M.name][claim]
            applicable = all(d.get("value", True) for d in r.details if d.get("name") == "applicable")
            cells.append("pass" if r.passed and applicable else "n/a" if r.passed else "FAIL")
            ok &= r.passed
        print(f"{claim:<{width}}" + "".join(f"{c:>15}" for c in cells))
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
