"""The Gaussian and projection mechanisms, the mean-point/query-release
reductions, and a Monte Carlo harness for error and sample complexity.

Mechanisms are plain callables ``alg(db, seed) -> vector`` so they can be
composed with the reductions and handed to :func:`measure_error`.  All
randomness flows from integer seeds; trial ``t`` of a run seeded by ``s``
uses ``derive_seed(s, t)`` so results do not depend on how trials are
scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, InputError
from .geometry import ConvexBody, lp_vertex_oracle, minkowski_norm, project, support_value
from .workload import (
    MEMBERSHIP_TOL,
    Database,
    Workload,
    _answers_or_zero,
    caratheodory_decompose,
    evaluate,
    sample_signed_databases,
    sensitivity_polytope,
)

ADVERSARIES = ("single-vertex", "random-vertices", "max-width-direction")

Mechanism = Callable[[Database, int], Union[np.ndarray, "MechanismResult"]]


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for ``(seed, *keys)``, stable across platforms and runs."""
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def sigma(eps: float, delta: float) -> float:
    """Noise multiplier ``(0.5*sqrt(eps) + sqrt(2*ln(1/delta))) / eps``."""
    if not (math.isfinite(eps) and eps > 0):
        raise DomainError(f"eps must be positive, got {eps!r}")
    if not (0 < delta < 1):
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
    return (0.5 * math.sqrt(eps) + math.sqrt(2.0 * math.log(1.0 / delta))) / eps


@dataclass(frozen=True)
class PrivacyParams:
    eps: float
    delta: float
    sigma: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sigma", sigma(self.eps, self.delta))


@dataclass(frozen=True, eq=False)
class MechanismResult:
    """Output of one mechanism run.

    ``noise_scale`` is the per-coordinate standard deviation of the noise
    added to the mean; ``noisy`` is the pre-projection vector for the
    projection mechanism (equal to ``output`` for the Gaussian mechanism).
    """

    output: np.ndarray
    noise_scale: float
    seed: int
    noisy: Optional[np.ndarray] = None
    gap: float = 0.0


@dataclass(frozen=True, eq=False)
class ErrorEstimate:
    """RMS error of a mechanism, maximized over an adversary's candidate databases.

    Because the supremum over all databases is replaced by a maximum over a
    finite candidate set, ``rms_error`` is a lower bound on the true error.
    """

    rms_error: float
    stderr: float
    trials: int
    adversary: str
    candidate: int = 0
    errors: Optional[np.ndarray] = field(default=None, repr=False)


def _as_vector(out) -> np.ndarray:
    return np.asarray(out.output if isinstance(out, MechanismResult) else out, dtype=float)


# ---------------------------------------------------------------------------
# mechanisms


def gaussian_mechanism(
    db: Database,
    params: PrivacyParams,
    bound: float,
    seed: int,
    noise: Optional[np.ndarray] = None,
) -> MechanismResult:
    """Mean of the points plus ``w / n`` with ``w ~ N(0, (sigma*bound)^2 I)``.

    ``noise`` replaces the standard-normal draw (before scaling) and exists
    for tests that need a fixed noise vector.
    """
    if db.points is None:
        raise InputError("the Gaussian mechanism takes a point database")
    if db.size < 1:
        raise DomainError("the Gaussian mechanism needs at least one point")
    if not bound > 0:
        raise DomainError(f"norm bound must be positive, got {bound!r}")
    norms = np.linalg.norm(db.points, axis=1)
    if norms.max() > bound + MEMBERSHIP_TOL:
        raise DomainError(f"point of norm {norms.max():.12g} exceeds the bound {bound}")
    m = db.points.shape[1]
    z = np.random.default_rng(seed).standard_normal(m) if noise is None else np.asarray(noise, float)
    scale = params.sigma * bound / db.size
    out = db.mean() + scale * z
    return MechanismResult(out, scale, seed, out)


def _check_in_unit_ball(body: ConvexBody) -> None:
    if body.diameter() > 1.0 + MEMBERSHIP_TOL:
        raise DomainError(f"body is not contained in the unit ball (radius {body.diameter():.12g})")


def projection_mechanism(
    body: ConvexBody,
    db: Database,
    params: PrivacyParams,
    seed: int,
    tol: float = 1e-10,
    noise: Optional[np.ndarray] = None,
    check_points: bool = True,
) -> MechanismResult:
    """Gaussian mechanism (norm bound 1) followed by Euclidean projection onto K.

    The noisy vector is exactly the Gaussian mechanism's output for the same
    seed, so the two mechanisms can be compared draw by draw.
    """
    _check_in_unit_ball(body)
    if db.points is None:
        raise InputError("the projection mechanism takes a point database")
    if check_points:
        for p in db.points:
            if minkowski_norm(body, p) > 1.0 + MEMBERSHIP_TOL:
                raise DomainError("database point lies outside the body")
    g = gaussian_mechanism(db, params, 1.0, seed, noise)
    proj = project(body, g.output, tol)
    return MechanismResult(proj.point, g.noise_scale, seed, g.output, proj.gap)


def exact_mean(db: Database, seed: int = 0) -> np.ndarray:
    """Non-private mean point; the identity baseline for the harness."""
    return db.mean()


def gaussian_meanpoint(params: PrivacyParams, bound: float = 1.0) -> Mechanism:
    return lambda db, seed: gaussian_mechanism(db, params, bound, seed).output


def projection_meanpoint(body: ConvexBody, params: PrivacyParams, tol: float = 1e-10) -> Mechanism:
    # Harness databases are built from the body's own extreme points.
    return lambda db, seed: projection_mechanism(body, db, params, seed, tol, check_points=False).output


def exact_answers(workload: Workload) -> Mechanism:
    """Non-private answers, with ``Q(empty) = 0``."""
    return lambda db, seed=0: _answers_or_zero(workload, db)


# ---------------------------------------------------------------------------
# reductions


def scaled_points(workload: Workload, db: Database) -> Database:
    """The point database ``{Q({e}) / sqrt(m) : e in D}`` inside ``K'``."""
    if not db.is_elements:
        raise InputError("expected an element database")
    pts = workload.matrix[:, db.elements].T / math.sqrt(workload.m)
    return Database.from_points(pts, db.counts)


def query_release_from_meanpoint(workload: Workload, meanpoint_alg: Mechanism, db: Database, seed: int = 0) -> np.ndarray:
    """Answer the workload with one call to a mean-point algorithm on ``K'``.

    Each element ``e`` becomes the point ``Q({e})/sqrt(m)``; the algorithm's
    output is rescaled by ``sqrt(m)``, so the per-query RMS error equals the
    algorithm's mean-point error.
    """
    if db.size < 1:
        raise DomainError("query release needs a non-empty database")
    pts = scaled_points(workload, db)
    return math.sqrt(workload.m) * _as_vector(meanpoint_alg(pts, seed))


def gaussian_query_release(workload: Workload, params: PrivacyParams) -> Mechanism:
    """Gaussian mechanism on the scaled points, lifted back to query answers."""
    inner = gaussian_meanpoint(params, 1.0)
    return lambda db, seed: (
        np.zeros(workload.m) if db.size == 0 else query_release_from_meanpoint(workload, inner, db, seed)
    )


def projection_query_release(workload: Workload, params: PrivacyParams, tol: float = 1e-10) -> Mechanism:
    inner = projection_meanpoint(sensitivity_polytope(workload, scaled=True), params, tol)
    return lambda db, seed: (
        np.zeros(workload.m) if db.size == 0 else query_release_from_meanpoint(workload, inner, db, seed)
    )


def meanpoint_from_query_release(
    workload: Workload,
    qr_alg: Mechanism,
    db: Database,
    seed: int,
    combos=None,
) -> np.ndarray:
    """Estimate the mean of points in ``K'`` with two calls to a query-release algorithm.

    Every point is decomposed into a signed combination of scaled columns
    (deterministically); one term per point is sampled into ``D+`` or
    ``D-``, and the output is
    ``(|D+| A(D+) - |D-| A(D-)) / (n sqrt(m))`` with ``A(empty) = 0``.
    Weighting each answer by its share of the ``n`` points makes the output
    equal the true mean in expectation when ``A`` is exact.  Running an
    (eps, delta) algorithm inside accounts as (2 eps, 2 delta) by
    composition; this is declared, not audited.

    ``combos`` may carry precomputed decompositions (one per stored row).
    """
    if db.points is None:
        raise InputError("expected a point database in K'")
    n = db.size
    if n < 1:
        raise DomainError("the mean-point reduction needs a non-empty database")
    if combos is None:
        combos = [caratheodory_decompose(workload, p) for p in db.points]
    expanded = [c for c, k in zip(combos, db.counts) for _ in range(int(k))]
    d_plus, d_minus = sample_signed_databases(expanded, derive_seed(seed, 0))
    a_plus = np.zeros(workload.m) if d_plus.size == 0 else _as_vector(qr_alg(d_plus, derive_seed(seed, 1)))
    a_minus = np.zeros(workload.m) if d_minus.size == 0 else _as_vector(qr_alg(d_minus, derive_seed(seed, 2)))
    return (d_plus.size * a_plus - d_minus.size * a_minus) / (n * math.sqrt(workload.m))


# ---------------------------------------------------------------------------
# error measurement


def _body_candidates(body: ConvexBody, n: int, adversary: str, count: int, seed: int):
    m = body.dim
    dbs = []
    if adversary == "single-vertex":
        seen = []
        for j in range(max(count, 1)):
            v = lp_vertex_oracle(body, np.eye(m)[j % m])
            if not any(np.array_equal(v, s) for s in seen):
                seen.append(v)
                dbs.append(Database.from_points(v[None, :], [n]))
    elif adversary == "random-vertices":
        for c in range(max(count, 1)):
            rng = np.random.default_rng(derive_seed(seed, 1, c))
            k = min(n, 256)
            pts = np.array([lp_vertex_oracle(body, g) for g in rng.standard_normal((k, m))])
            counts = rng.multinomial(n - k, np.full(k, 1.0 / k)) + 1
            dbs.append(Database.from_points(pts, counts))
    elif adversary == "max-width-direction":
        for c in range(max(count, 1)):
            rng = np.random.default_rng(derive_seed(seed, 2, c))
            U = rng.standard_normal((64 * m, m))
            U /= np.linalg.norm(U, axis=1, keepdims=True)
            best = max(range(U.shape[0]), key=lambda i: support_value(body, U[i]))
            v = lp_vertex_oracle(body, U[best])
            dbs.append(Database.from_points(v[None, :], [n]))
    else:
        raise DomainError(f"unknown adversary {adversary!r}; expected one of {ADVERSARIES}")
    return dbs


def _workload_candidates(workload: Workload, n: int, adversary: str, count: int, seed: int):
    U = workload.universe_size
    dbs = []
    if adversary == "single-vertex":
        for e in range(min(max(count, 1), U)):
            dbs.append(Database.from_elements([e], [n]))
    elif adversary == "random-vertices":
        for c in range(max(count, 1)):
            rng = np.random.default_rng(derive_seed(seed, 1, c))
            counts = rng.multinomial(n, np.full(U, 1.0 / U))
            keep = np.flatnonzero(counts)
            dbs.append(Database.from_elements(keep, counts[keep]))
    elif adversary == "max-width-direction":
        for c in range(max(count, 1)):
            rng = np.random.default_rng(derive_seed(seed, 2, c))
            u = rng.standard_normal(workload.m)
            e = int(np.argmax(np.abs(u @ workload.matrix)))
            dbs.append(Database.from_elements([e], [n]))
    else:
        raise DomainError(f"unknown adversary {adversary!r}; expected one of {ADVERSARIES}")
    return dbs


def measure_error(
    target: Union[ConvexBody, Workload],
    mechanism: Mechanism,
    n: int,
    trials: int = 1000,
    adversary: str = "single-vertex",
    seed: int = 0,
    candidates: int = 4,
) -> ErrorEstimate:
    """Monte Carlo RMS error of ``mechanism`` at database size ``n``.

    For a body the error is ``(E ||A(D) - mean(D)||^2)^(1/2)``; for a
    workload it is ``(E ||A(D) - Q(D)||^2 / m)^(1/2)``.  Candidate databases
    come from ``adversary``; trial ``t`` runs the mechanism with seed
    ``derive_seed(seed, 0, t)`` for every candidate and every ``n``, so
    estimates at different sizes share their random numbers.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if isinstance(trials, bool) or int(trials) != trials or trials < 1:
        raise DomainError(f"trials must be a positive integer, got {trials!r}")
    n, trials = int(n), int(trials)
    if isinstance(target, Workload):
        dbs = _workload_candidates(target, n, adversary, candidates, seed)
        truth = [evaluate(target, d) for d in dbs]
        norm = 1.0 / target.m
    elif isinstance(target, ConvexBody):
        dbs = _body_candidates(target, n, adversary, candidates, seed)
        truth = [d.mean() for d in dbs]
        norm = 1.0
    else:
        raise InputError("target must be a ConvexBody or a Workload")
    seeds = [derive_seed(seed, 0, t) for t in range(trials)]
    best = None
    for c, (db, x) in enumerate(zip(dbs, truth)):
        sq = np.array([norm * float(np.sum((_as_vector(mechanism(db, s)) - x) ** 2)) for s in seeds])
        rms = math.sqrt(float(sq.mean()))
        se = 0.0
        if trials > 1 and rms > 0:
            se = float(sq.std(ddof=1)) / math.sqrt(trials) / (2.0 * rms)
        est = ErrorEstimate(rms, se, trials, adversary, c, np.sqrt(sq))
        if best is None or est.rms_error > best.rms_error:
            best = est
    return best


@dataclass(frozen=True)
class SampleComplexity:
    """Result of :func:`sample_complexity_search`.

    ``n`` is ``None`` when the error stayed above ``alpha`` up to the cap.
    """

    n: Optional[int]
    error_at_n: float
    error_below: Optional[float]
    probes: tuple
    alpha: float

    @property
    def unbounded(self) -> bool:
        return self.n is None


def sample_complexity_search(
    target: Union[ConvexBody, Workload],
    mechanism: Mechanism,
    alpha: float,
    trials: int = 1000,
    seed: int = 0,
    adversary: str = "single-vertex",
    n_cap: int = 10**8,
    candidates: int = 4,
) -> SampleComplexity:
    """Smallest ``n`` whose measured error is at most ``alpha``.

    Doubles ``n`` from 1 until the error drops below ``alpha`` and then
    bisects.  The mechanism's error must be non-increasing in ``n``; with
    shared trial seeds this holds exactly for both implemented mechanisms.
    """
    if not (0 < alpha < 1):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    cache: dict[int, float] = {}

    def err(n: int) -> float:
        if n not in cache:
            cache[n] = measure_error(target, mechanism, n, trials, adversary, seed, candidates).rms_error
        return cache[n]

    hi = 1
    while err(hi) > alpha:
        if hi >= n_cap:
            return SampleComplexity(None, err(hi), None, tuple(sorted(cache.items())), alpha)
        hi = min(2 * hi, n_cap)
    lo = hi // 2  # err(lo) > alpha whenever lo >= 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if err(mid) <= alpha:
            hi = mid
        else:
            lo = mid
    below = err(hi - 1) if hi > 1 else None
    return SampleComplexity(hi, err(hi), below, tuple(sorted(cache.items())), alpha)
