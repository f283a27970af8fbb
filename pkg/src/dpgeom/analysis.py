"""Sample-complexity bound calculators and Gelfand-width probes.

Every asymptotic constant is set to 1 and logarithms are natural logs of
``2m``; both choices are recorded in the report metadata, and the values
are meaningful only up to constants.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import HalfspaceIntersection, QhullError

from .errors import DomainError, InputError
from .geometry import ConvexBody, SubspaceBasis, WidthEstimate, gaussian_width, to_vpolytope
from .mechanisms import PrivacyParams, derive_seed
from .workload import MEMBERSHIP_TOL, Workload, sensitivity_polytope

GAUSSIAN_OPTIMAL = "gaussian-optimal"
PROJECTION_FAVORED = "projection-favored"

#: Largest ambient dimension for which sections are enumerated exactly.
GELFAND_DIM_CAP = 12

_REGIME_CUTOFF = 0.5
_FACET_TOL = 1e-9


@dataclass(frozen=True)
class BoundReport:
    """Formula values for one body (or workload) at one error level.

    ``lower_bound_asserted`` is False when ``alpha`` exceeds the validity
    threshold of the lower bound, in which case ``meanpt_lower`` and
    ``qr_lower`` are reported but not claimed.
    """

    problem: str
    m: int
    alpha: float
    eps: float
    delta: float
    sigma: float
    ell_star: WidthEstimate
    gauss_upper: float
    proj_upper: float
    meanpt_lower: float
    qr_lower: float
    alpha_validity_threshold: float
    regime_ratio: float
    regime: str
    lower_bound_asserted: bool
    metadata: dict = field(default_factory=dict)

    @property
    def best_upper(self) -> float:
        return min(self.gauss_upper, self.proj_upper)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_alpha(alpha: float) -> None:
    if not (0 < alpha < 1):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def _metadata(seed: int, samples: int) -> dict:
    return {"constants": "unit", "log_base": "e", "seeds": {"width": seed}, "width_samples": samples}


def bound_report(
    body: ConvexBody,
    eps: float,
    delta: float,
    alpha: float,
    width_samples: int = 100_000,
    seed: int = 0,
) -> BoundReport:
    """Mean-point bounds for a body ``K`` inside the unit ball.

    Upper bounds ``sigma*sqrt(m)/alpha`` (Gaussian) and
    ``sigma*l*(K)/alpha^2`` (projection); lower bound
    ``sigma*l*(K)/((ln 2m)^2 alpha)``, valid for
    ``alpha <= l*(K)/(sqrt(m) (ln 2m)^2)``.  ``qr_lower`` is the
    query-release lower bound of a workload whose scaled sensitivity
    polytope is ``K``.
    """
    _check_alpha(alpha)
    if body.diameter() > 1.0 + MEMBERSHIP_TOL:
        raise DomainError("bound_report needs a body inside the unit ball")
    p = PrivacyParams(eps, delta)
    m = body.dim
    ws = gaussian_width(body, width_samples, seed)
    ell = ws.value
    L = math.log(2 * m)
    threshold = ell / (math.sqrt(m) * L**2)
    ratio = ell / math.sqrt(m)
    return BoundReport(
        problem="mean-point",
        m=m,
        alpha=alpha,
        eps=eps,
        delta=delta,
        sigma=p.sigma,
        ell_star=ws,
        gauss_upper=p.sigma * math.sqrt(m) / alpha,
        proj_upper=p.sigma * ell / alpha**2,
        meanpt_lower=p.sigma * ell / (L**2 * alpha),
        qr_lower=p.sigma * ell**2 / (math.sqrt(m) * L**4 * alpha),
        alpha_validity_threshold=threshold,
        regime_ratio=ratio,
        regime=GAUSSIAN_OPTIMAL if ratio >= _REGIME_CUTOFF else PROJECTION_FAVORED,
        lower_bound_asserted=alpha <= threshold,
        metadata=_metadata(seed, width_samples),
    )


def query_release_bounds(
    workload: Workload,
    eps: float,
    delta: float,
    alpha: float,
    width_samples: int = 100_000,
    seed: int = 0,
) -> BoundReport:
    """Query-release bounds in terms of the unscaled sensitivity polytope ``K``.

    Upper bounds ``sigma*sqrt(m)/alpha`` and ``sigma*l*(K)/(sqrt(m) alpha^2)``;
    lower bound ``sigma*l*(K)^2/(m^1.5 (ln 2m)^4 alpha)`` valid for
    ``alpha <= l*(K)/(m (ln 2m)^2)``.  ``meanpt_lower`` is the mean-point
    lower bound for ``K' = K/sqrt(m)``.
    """
    _check_alpha(alpha)
    p = PrivacyParams(eps, delta)
    K = sensitivity_polytope(workload)
    m = workload.m
    ws = gaussian_width(K, width_samples, seed)
    ell = ws.value
    L = math.log(2 * m)
    threshold = ell / (m * L**2)
    ratio = ell / m
    return BoundReport(
        problem="query-release",
        m=m,
        alpha=alpha,
        eps=eps,
        delta=delta,
        sigma=p.sigma,
        ell_star=ws,
        gauss_upper=p.sigma * math.sqrt(m) / alpha,
        proj_upper=p.sigma * ell / (math.sqrt(m) * alpha**2),
        meanpt_lower=p.sigma * ell / (math.sqrt(m) * L**2 * alpha),
        qr_lower=p.sigma * ell**2 / (m**1.5 * L**4 * alpha),
        alpha_validity_threshold=threshold,
        regime_ratio=ratio,
        regime=GAUSSIAN_OPTIMAL if ratio >= _REGIME_CUTOFF else PROJECTION_FAVORED,
        lower_bound_asserted=alpha <= threshold,
        metadata=_metadata(seed, width_samples),
    )


def padding_scaler(scz_at_alpha: float, alpha: float, alpha_prime: float) -> float:
    """Lower bound at the finer level ``alpha_prime`` from one at ``alpha``: ``(alpha/alpha_prime) * scz``."""
    if not (0 < alpha_prime < alpha < 1):
        raise DomainError(f"need 0 < alpha' < alpha < 1, got alpha={alpha!r}, alpha'={alpha_prime!r}")
    if scz_at_alpha < 0:
        raise DomainError("sample complexity must be non-negative")
    return (alpha / alpha_prime) * scz_at_alpha


# ---------------------------------------------------------------------------
# Gelfand probes


@dataclass(frozen=True, eq=False)
class GelfandProbe:
    """One subspace E of dimension ``m - k + 1`` and the diameter of the polar section.

    ``ratio = sqrt(m - k + 1) / diameter``; since ``c_k(K°)`` is an infimum
    over subspaces, ``diameter >= c_k(K°)`` and ``ratio`` is a lower bound
    on ``sqrt(m - k + 1) / c_k(K°)``.
    """

    k: int
    subspace: SubspaceBasis
    diameter: float
    ratio: float
    section_vertices: Optional[np.ndarray] = field(default=None, repr=False)
    index: int = 0


def _unique_rows(X: np.ndarray) -> np.ndarray:
    _, idx = np.unique(np.round(X, 12), axis=0, return_index=True)
    return X[np.sort(idx)]


def _section_vertices(A: np.ndarray, level: float) -> np.ndarray:
    """Vertices of ``{z in R^d : |<a_i, z>| <= level}`` in subspace coordinates."""
    d = A.shape[1]
    A = A[np.linalg.norm(A, axis=1) > 1e-12]
    if A.shape[0] == 0 or np.linalg.matrix_rank(A) < d:
        raise DomainError("degenerate section: the polar body is unbounded on this subspace")
    if d == 1:
        t = level / float(np.max(np.abs(A[:, 0])))
        return np.array([[t], [-t]])
    A = _unique_rows(A)
    halfspaces = np.vstack([np.hstack([A, -level * np.ones((A.shape[0], 1))]),
                            np.hstack([-A, -level * np.ones((A.shape[0], 1))])])
    try:
        hs = HalfspaceIntersection(halfspaces, np.zeros(d))
    except QhullError as exc:
        raise DomainError(f"section vertex enumeration failed: {exc}") from None
    verts = hs.intersections
    # Re-solve each vertex on its active constraints.
    out = []
    for z in verts:
        s = A @ z
        act = np.abs(np.abs(s) - level) <= _FACET_TOL * max(level, 1.0)
        if np.count_nonzero(act) >= d:
            rhs = np.sign(s[act]) * level
            sol, *_ = np.linalg.lstsq(A[act], rhs, rcond=None)
            if np.max(np.abs(A @ sol)) <= level * (1 + _FACET_TOL):
                z = sol
        out.append(z)
    return _unique_rows(np.array(out))


def _zonotope_polar_vertices(G: np.ndarray) -> np.ndarray:
    """Vertices of the polar of the zonotope ``sum_j [-1, 1] g_j`` (rows of ``G``).

    Each facet of the zonotope is spanned by d-1 generators; its unit
    normal ``u`` and support value ``h(u) = sum_j |<g_j, u>|`` give the
    polar vertex ``u / h(u)``.  The section of the polar of a cube by E is
    exactly this polar, taken inside E.
    """
    d = G.shape[1]
    G = G[np.linalg.norm(G, axis=1) > 1e-12]
    if G.shape[0] == 0 or np.linalg.matrix_rank(G) < d:
        raise DomainError("degenerate section: the polar body is unbounded on this subspace")
    out = []
    for S in itertools.combinations(range(G.shape[0]), d - 1):
        if d > 1:
            _, sv, vt = np.linalg.svd(G[list(S)])
            if sv[-1] <= 1e-10 * sv[0]:
                continue
            u = vt[-1]
        else:
            u = np.ones(1)
        h = float(np.sum(np.abs(G @ u)))
        out.append(u / h)
        out.append(-u / h)
    return _unique_rows(np.array(out))


def section_diameter(body: ConvexBody, basis: SubspaceBasis):
    """``max ||y||_2`` over ``K° ∩ E`` together with the enumerated section vertices.

    Vertices are returned in the coordinates of ``basis``.
    """
    if basis.ambient_dim != body.dim:
        raise InputError("basis and body dimensions differ")
    if body.kind == "ball":
        return 1.0 / body.scale, None
    if body.kind == "scaled_cube":
        verts = _zonotope_polar_vertices(body.scale / math.sqrt(body.dim) * basis.columns)
        return float(np.max(np.linalg.norm(verts, axis=1))), verts
    vp = to_vpolytope(body)
    A = vp.vertices @ basis.columns
    verts = _section_vertices(A, 1.0 / vp.scale)
    return float(np.max(np.linalg.norm(verts, axis=1))), verts


def gelfand_probe(
    body: ConvexBody,
    k: int,
    subspaces: int = 32,
    seed: int = 0,
    bases: Optional[list] = None,
) -> GelfandProbe:
    """Best of ``subspaces`` random probes of ``sqrt(m-k+1)/c_k(K°)``.

    Subspace ``j`` is drawn from a generator seeded by ``(seed, j)``, so
    adding probes never lowers the best ratio.  Explicit ``bases`` (each of
    dimension ``m - k + 1``) replace the random draws.
    """
    m = body.dim
    if m > GELFAND_DIM_CAP:
        raise DomainError(f"Gelfand probes are limited to m <= {GELFAND_DIM_CAP}, got {m}")
    if isinstance(k, bool) or int(k) != k or not (1 <= k <= m):
        raise DomainError(f"k must be an integer in [1, {m}], got {k!r}")
    d = m - int(k) + 1
    if bases is None:
        if subspaces < 1:
            raise DomainError("need at least one subspace")
        bases = [SubspaceBasis.random(m, d, np.random.default_rng(derive_seed(seed, j))) for j in range(subspaces)]
    best = None
    for j, B in enumerate(bases):
        if B.dim != d:
            raise InputError(f"subspace {j} has dimension {B.dim}, expected {d}")
        diam, verts = section_diameter(body, B)
        probe = GelfandProbe(int(k), B, diam, math.sqrt(d) / diam, verts, j)
        if best is None or probe.ratio > best.ratio:
            best = probe
    return best
