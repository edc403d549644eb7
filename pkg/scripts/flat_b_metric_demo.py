"""B-metrics [[p, 1], [1, 0]] with p linear in the fiber coordinate are flat.

    python3 scripts/flat_b_metric_demo.py

Such a p makes the purity premise on the partials fail, yet every curvature
component vanishes, so all curvature purity conditions hold trivially. Adding a
z2^2 term produces nonzero curvature. Useful when fuzzing curvature claims:
the random family has to include quadratic fiber terms to be informative.
"""

import numpy as np

from nilgeom.connection import christoffel, partials_purity
from nilgeom.curvature import riemann
from nilgeom.manifold import adapted_f
from nilgeom.sampling import Sampling
from nilgeom.tensor import TensorField

C = ("z1", "z2")


def main() -> None:
    f = adapted_f(1, 0, C)
    pts = Sampling().draw(2)
    for p in ("z1^2 + 1", "z1^2 + 3*z2 + 1", "z1*z2 + z2 + 2", "z2^2 + z1 + 2", "z1*z2^2 + 2"):
        g = TensorField.from_strings([[p, "1"], ["1", "0"]], C, "ll")
        R = riemann(christoffel(g))
        dg = partials_purity(g, f).max_residual
        print(f"p = {p:18s} dg purity residual {dg:9.3e}   max |R| {np.max(np.abs(R.values(pts))):9.3e}")


if __name__ == "__main__":
    main()
