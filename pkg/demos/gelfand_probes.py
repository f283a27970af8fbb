"""Probing Gelfand widths of polar bodies with random sections.

For each k the probe reports sqrt(m-k+1)/diam(K° ∩ E) over random
subspaces E of dimension m-k+1; the best value is a lower bound on
sqrt(m-k+1)/c_k(K°).
"""

from __future__ import annotations

from dpgeom.analysis import gelfand_probe
from dpgeom.geometry import ConvexBody

m = 8
for body in (ConvexBody.ball(m), ConvexBody.cross_polytope(m), ConvexBody.scaled_cube(m)):
    ratios = [gelfand_probe(body, k, subspaces=16, seed=0).ratio for k in range(1, m + 1)]
    print(f"{body.kind:>15}: " + " ".join(f"{r:6.3f}" for r in ratios))
