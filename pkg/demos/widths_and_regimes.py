"""Gaussian mean widths and which mechanism the formulas favour.

For a body K inside the unit ball the Gaussian mechanism needs about
sigma*sqrt(m)/alpha samples and the projection mechanism about
sigma*l*(K)/alpha^2, so the ratio l*(K)/sqrt(m) decides between them.
"""

from __future__ import annotations

import math

from dpgeom.analysis import bound_report
from dpgeom.geometry import ConvexBody

m = 64
bodies = {
    "ball": ConvexBody.ball(m),
    "scaled cube": ConvexBody.scaled_cube(m),
    "cross-polytope": ConvexBody.cross_polytope(m),
}

print(f"{'body':>15} {'l*(K)':>8} {'l*/sqrt(m)':>11} {'gauss n':>9} {'proj n':>9}  regime")
for name, body in bodies.items():
    rep = bound_report(body, eps=1.0, delta=1e-6, alpha=0.05, width_samples=50_000, seed=0)
    print(
        f"{name:>15} {rep.ell_star.value:8.3f} {rep.regime_ratio:11.3f} "
        f"{rep.gauss_upper:9.0f} {rep.proj_upper:9.0f}  {rep.regime}"
    )

# The cross-polytope width grows like sqrt(2 ln m), far below sqrt(m).
print(f"\nsqrt(2 ln {m}) = {math.sqrt(2 * math.log(m)):.3f}")
