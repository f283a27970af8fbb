"""Moving between query release and mean-point estimation.

A workload Q over a universe becomes the body K' = conv{±Q({e})/sqrt(m)};
answering Q is the same as estimating a mean in K', and conversely a
mean in K' can be estimated from two query-release calls after a signed
Caratheodory decomposition.
"""

from __future__ import annotations

import math

import numpy as np

from dpgeom.mechanisms import (
    PrivacyParams,
    exact_answers,
    gaussian_meanpoint,
    meanpoint_from_query_release,
    query_release_from_meanpoint,
)
from dpgeom.workload import Database, caratheodory_decompose, evaluate, one_way_marginals, sensitivity_polytope

w = one_way_marginals(4)
db = Database.from_elements([1, 3, 3, 7, 12, 15])
params = PrivacyParams(1.0, 1e-6)

print("true answers:     ", evaluate(w, db))
print("via mean point:   ", query_release_from_meanpoint(w, gaussian_meanpoint(params), db.repeated(200), seed=0))

# A point of K' written with at most m+1 signed columns.
x = np.array([0.3, -0.1, 0.05, 0.2]) / math.sqrt(4)
combo = caratheodory_decompose(w, x)
print("\ndecomposition elements", combo.elements, "weights", np.round(combo.weights, 4))
print("reconstruction error", np.max(np.abs(combo.reconstruct(w) - x)))

# With exact answers the reduction is an unbiased sampler of the mean.
pts = Database.from_points(np.tile(x, (50, 1)))
outs = np.array([meanpoint_from_query_release(w, exact_answers(w), pts, s) for s in range(2000)])
R = sensitivity_polytope(w, scaled=True).diameter()
print("\nmean of outputs", np.round(outs.mean(axis=0), 4), "target", np.round(x, 4))
print("second moment", np.mean(np.sum((outs - x) ** 2, axis=1)), "<= 4R^2/n =", 4 * R**2 / 50)
