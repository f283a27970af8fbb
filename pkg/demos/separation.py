"""Projection versus plain Gaussian noise on the l1 ball.

Both mechanisms see the same noise draws (shared seeds), so the
projected error is never larger; on B_1^64 it is several times smaller
when the data sit at a vertex.
"""

from __future__ import annotations

from dpgeom.geometry import ConvexBody
from dpgeom.mechanisms import PrivacyParams, gaussian_meanpoint, measure_error, projection_meanpoint

params = PrivacyParams(eps=1.0, delta=1e-6)

for body in (ConvexBody.cross_polytope(64), ConvexBody.scaled_cube(16)):
    gauss = gaussian_meanpoint(params)
    proj = projection_meanpoint(body, params)
    print(f"{body.kind} m={body.dim}")
    for n in (100, 300, 1000):
        g = measure_error(body, gauss, n, trials=300, seed=1)
        p = measure_error(body, proj, n, trials=300, seed=1)
        print(f"  n={n:5d}  gaussian {g.rms_error:.4f}  projection {p.rms_error:.4f}  ratio {p.rms_error / g.rms_error:.3f}")

# Spread-out data keep the noisy mean inside the body, so projection changes nothing.
l1 = ConvexBody.cross_polytope(64)
for adversary in ("single-vertex", "random-vertices"):
    g = measure_error(l1, gaussian_meanpoint(params), 500, 200, adversary, seed=2)
    p = measure_error(l1, projection_meanpoint(l1, params), 500, 200, adversary, seed=2)
    print(f"{adversary:>16}: ratio {p.rms_error / g.rms_error:.3f}")
