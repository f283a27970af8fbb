"""Symmetric convex bodies and the geometric functionals computed on them.

A body is either an explicit symmetric hull ``conv{±v_i}`` (kind
``"vpolytope"``) or one of three analytic families: the Euclidean ball,
the scaled cube ``Q^m = [-1/sqrt(m), 1/sqrt(m)]^m`` and the cross-polytope
``B_1^m``.  Every kind carries a positive ``scale`` so that ``rK`` is
represented without touching vertex data.

Only one vertex per antipodal pair is stored; every oracle considers both
signs, so central symmetry cannot be broken by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import ConvergenceError, DomainError, InputError

KINDS = ("vpolytope", "ball", "scaled_cube", "cross_polytope")

#: Largest cube dimension that may be expanded into its 2^(m-1) vertex pairs.
CUBE_EXPANSION_CAP = 16

# Rows of Gaussian samples processed per block by the Monte Carlo estimators.
_BLOCK = 8192

# Facet-based gauges are used for full-dimensional vpolytopes up to this dim.
_FACET_DIM_CAP = 10


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """A centrally symmetric convex body in R^dim.

    ``vertices`` holds one representative per antipodal pair and is only
    used for ``kind == "vpolytope"``.  The body is ``scale`` times the unit
    member of its family.
    """

    kind: str
    dim: int
    scale: float = 1.0
    vertices: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown body kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise InputError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        scale = float(self.scale)
        if not math.isfinite(scale) or scale <= 0:
            raise InputError(f"scale must be finite and positive, got {self.scale!r}")
        object.__setattr__(self, "scale", scale)
        if self.kind == "vpolytope":
            if self.vertices is None:
                raise InputError("vpolytope requires vertices")
            V = np.array(self.vertices, dtype=float, ndmin=2)
            if V.ndim != 2 or V.shape[0] < 1 or V.shape[1] != self.dim:
                raise InputError(
                    f"vertices must have shape (k>=1, {self.dim}), got {V.shape}"
                )
            if not np.all(np.isfinite(V)):
                raise InputError("vertices must be finite")
            V.setflags(write=False)
            object.__setattr__(self, "vertices", V)
        elif self.vertices is not None:
            raise InputError(f"{self.kind} bodies take no vertex list")

    # -- constructors -----------------------------------------------------

    @classmethod
    def ball(cls, dim: int, radius: float = 1.0) -> "ConvexBody":
        return cls("ball", dim, radius)

    @classmethod
    def scaled_cube(cls, dim: int, scale: float = 1.0) -> "ConvexBody":
        """``scale * Q^dim``; use ``scale=sqrt(dim)`` for ``[-1, 1]^dim``."""
        return cls("scaled_cube", dim, scale)

    @classmethod
    def cross_polytope(cls, dim: int, scale: float = 1.0) -> "ConvexBody":
        return cls("cross_polytope", dim, scale)

    @classmethod
    def from_vertices(cls, vertices, scale: float = 1.0) -> "ConvexBody":
        V = np.array(vertices, dtype=float, ndmin=2)
        if V.ndim != 2:
            raise InputError("vertices must be a 2-D array")
        return cls("vpolytope", V.shape[1], scale, V)

    def scaled(self, r: float) -> "ConvexBody":
        """The body ``r * self``."""
        return ConvexBody(self.kind, self.dim, self.scale * float(r), self.vertices)

    # -- basic facts -------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        """Number of stored antipodal pairs (vpolytope only)."""
        return 0 if self.vertices is None else self.vertices.shape[0]

    def diameter(self) -> float:
        """``max ||x||_2`` over the body (the circumradius about the origin)."""
        if self.kind == "vpolytope":
            return self.scale * float(np.max(np.linalg.norm(self.vertices, axis=1)))
        # Q^m corners, the B_1 vertices and the ball boundary all have unit norm.
        return self.scale

    def is_full_dimensional(self) -> bool:
        if self.kind != "vpolytope":
            return True
        return int(np.linalg.matrix_rank(self.vertices)) == self.dim

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim, "scale": self.scale}
        if self.kind == "vpolytope":
            out["vertices"] = self.vertices.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ConvexBody":
        if not isinstance(data, dict):
            raise InputError("body description must be a JSON object")
        try:
            kind = data["kind"]
            dim = data["dim"]
        except KeyError as exc:
            raise InputError(f"body description lacks {exc.args[0]!r}") from None
        if isinstance(dim, bool) or not isinstance(dim, int):
            raise InputError(f"dim must be an integer, got {dim!r}")
        scale = data.get("scale", 1.0)
        if isinstance(scale, bool) or not isinstance(scale, (int, float)):
            raise InputError(f"scale must be a number, got {scale!r}")
        vertices = data.get("vertices")
        if kind == "vpolytope":
            if not isinstance(vertices, list) or not vertices:
                raise InputError("vpolytope requires a non-empty vertex list")
            try:
                vertices = np.array(vertices, dtype=float)
            except (TypeError, ValueError):
                raise InputError("vertices must be rows of numbers") from None
        return cls(kind, dim, scale, vertices)


@dataclass(frozen=True)
class WidthEstimate:
    """Monte Carlo estimate of a Gaussian functional of a body."""

    value: float
    stderr: float
    samples: int
    seed: int


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal columns spanning a subspace E of R^m."""

    columns: np.ndarray

    def __post_init__(self):
        B = np.array(self.columns, dtype=float, ndmin=2)
        if B.ndim != 2 or B.shape[1] < 1 or B.shape[1] > B.shape[0]:
            raise InputError(f"basis must be m x d with 1 <= d <= m, got {B.shape}")
        if not np.all(np.isfinite(B)):
            raise InputError("basis must be finite")
        if np.max(np.abs(B.T @ B - np.eye(B.shape[1]))) > 1e-10:
            raise InputError("basis columns are not orthonormal")
        B.setflags(write=False)
        object.__setattr__(self, "columns", B)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def coordinate(cls, m: int, axes: Sequence[int]) -> "SubspaceBasis":
        return cls(np.eye(m)[:, list(axes)])

    @classmethod
    def random(cls, m: int, d: int, rng: np.random.Generator) -> "SubspaceBasis":
        """Haar-random d-dimensional subspace of R^m."""
        q, r = np.linalg.qr(rng.standard_normal((m, d)))
        # Sign fix makes the draw a deterministic function of the Gaussian matrix.
        return cls(q * np.where(np.diag(r) < 0, -1.0, 1.0))


# ---------------------------------------------------------------------------
# validation helpers


def _vector(body: ConvexBody, x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (body.dim,):
        raise InputError(f"{name} must have shape ({body.dim},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} must be finite")
    return v


def _canonical_sign(x: np.ndarray) -> np.ndarray:
    """Return the representative of {x, -x} whose first nonzero entry is positive."""
    nz = np.flatnonzero(x)
    if nz.size and x[nz[0]] < 0:
        return -x
    return x


# ---------------------------------------------------------------------------
# support function and linear maximization


def _unit_support(body: ConvexBody, D: np.ndarray) -> np.ndarray:
    """Row-wise support values of the unit-scale body for directions ``D`` (k x m)."""
    if body.kind == "ball":
        return np.linalg.norm(D, axis=1)
    if body.kind == "scaled_cube":
        return np.sum(np.abs(D), axis=1) / math.sqrt(body.dim)
    if body.kind == "cross_polytope":
        return np.max(np.abs(D), axis=1)
    return np.max(np.abs(D @ body.vertices.T), axis=1)


def support_value(body: ConvexBody, direction) -> float:
    """``h_K(d) = max_{x in K} <x, d>``."""
    d = _vector(body, direction, "direction")
    return body.scale * float(_unit_support(body, d[None, :])[0])


def lp_vertex_oracle(body: ConvexBody, direction) -> np.ndarray:
    """A point of K attaining ``support_value(body, direction)``.

    Ties go to the lowest vertex index, then to ``+v`` over ``-v``.
    """
    d = _vector(body, direction, "direction")
    m = body.dim
    if body.kind == "ball":
        nrm = np.linalg.norm(d)
        if nrm == 0:
            return body.scale * np.eye(m)[0]
        return body.scale * d / nrm
    if body.kind == "scaled_cube":
        return body.scale * np.where(d >= 0, 1.0, -1.0) / math.sqrt(m)
    if body.kind == "cross_polytope":
        i = int(np.argmax(np.abs(d)))
        out = np.zeros(m)
        out[i] = body.scale if d[i] >= 0 else -body.scale
        return out
    s = body.vertices @ d
    i = int(np.argmax(np.abs(s)))
    sign = 1.0 if s[i] >= 0 else -1.0
    return body.scale * sign * body.vertices[i]


# ---------------------------------------------------------------------------
# Minkowski gauge


def _signed_atoms(vertices: np.ndarray) -> np.ndarray:
    """Columns ``[v_1 .. v_k, -v_1 .. -v_k]`` as an m x 2k matrix."""
    return np.hstack([vertices.T, -vertices.T])


def _reduce_support(A: np.ndarray, idx: np.ndarray, w: np.ndarray):
    """Drop atoms until the active columns of ``A`` are linearly independent.

    Moves the weights along null-space directions oriented so that the total
    weight never increases; on ties the highest-index atom is eliminated.
    """
    idx = list(idx)
    w = list(w)
    while idx:
        M = A[:, idx]
        if np.linalg.matrix_rank(M) == len(idx):
            break
        _, _, vt = np.linalg.svd(M)
        c = vt[-1]
        total = c.sum()
        if total < -1e-12 or (abs(total) <= 1e-12 and c[int(np.argmax(np.abs(c)))] < 0):
            c = -c
        pos = c > 1e-14
        ratios = np.full(len(idx), np.inf)
        ratios[pos] = np.asarray(w)[pos] / c[pos]
        t = ratios.min()
        ties = np.flatnonzero(ratios <= t * (1 + 1e-12) + 1e-300)
        drop = int(ties.max())
        wn = np.asarray(w) - t * c
        wn[drop] = 0.0
        keep = [j for j in range(len(idx)) if j != drop and wn[j] > 0]
        idx = [idx[j] for j in keep]
        w = [float(wn[j]) for j in keep]
    return np.array(idx, dtype=int), np.array(w, dtype=float)


def _polish(A: np.ndarray, idx: np.ndarray, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Re-solve the weights on a fixed independent support to machine precision."""
    if idx.size == 0:
        return w
    sol, *_ = np.linalg.lstsq(A[:, idx], x, rcond=None)
    if np.all(sol >= -1e-9) and np.linalg.norm(A[:, idx] @ sol - x) <= np.linalg.norm(
        A[:, idx] @ w - x
    ):
        return np.maximum(sol, 0.0)
    return w


def conic_decomposition(vertices: np.ndarray, x: np.ndarray):
    """Minimum-weight signed conic combination of ``vertices`` equal to ``x``.

    Returns ``(gauge, atom_indices, weights)`` where atom index ``j < k``
    denotes ``+v_j`` and ``j >= k`` denotes ``-v_{j-k}``; the active atoms are
    linearly independent (so there are at most ``m`` of them).  Returns
    ``(inf, [], [])`` when ``x`` lies outside the span of the vertices.
    The linear program is solved with the HiGHS dual simplex, then the
    support is reduced to a basis and the weights re-solved exactly.
    """
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return 0.0, np.zeros(0, dtype=int), np.zeros(0)
    A = _signed_atoms(vertices)
    res = linprog(
        np.ones(A.shape[1]),
        A_eq=A,
        b_eq=x,
        bounds=(0, None),
        method="highs-ds",
    )
    if res.status == 2:
        return math.inf, np.zeros(0, dtype=int), np.zeros(0)
    if res.status != 0:
        raise ConvergenceError(f"gauge linear program failed: {res.message}", math.nan, res.nit)
    lam = res.x
    idx = np.flatnonzero(lam > 1e-13)
    idx, w = _reduce_support(A, idx, lam[idx])
    w = _polish(A, idx, w, x)
    if np.linalg.norm(A[:, idx] @ w - x) > 1e-7 * max(1.0, np.linalg.norm(x)):
        # Numerically outside the span: the simplex reported feasibility
        # only up to its own tolerance.
        return math.inf, np.zeros(0, dtype=int), np.zeros(0)
    return float(w.sum()), idx, w


def minkowski_norm(body: ConvexBody, point) -> float:
    """Gauge ``||x||_K = min{r : x in rK}``; ``inf`` outside the span of K."""
    x = _vector(body, point, "point")
    if body.kind == "ball":
        return float(np.linalg.norm(x)) / body.scale
    if body.kind == "scaled_cube":
        return math.sqrt(body.dim) * float(np.max(np.abs(x))) / body.scale
    if body.kind == "cross_polytope":
        return float(np.sum(np.abs(x))) / body.scale
    g, _, _ = conic_decomposition(body.vertices, _canonical_sign(x))
    return g / body.scale


def contains(body: ConvexBody, point, tol: float = 1e-9) -> bool:
    return minkowski_norm(body, point) <= 1.0 + tol


def _facet_gauge(vertices: np.ndarray):
    """Gauge of the full-dimensional hull conv{±v_i} via its facet normals."""
    pts = np.vstack([vertices, -vertices])
    hull = ConvexHull(pts)
    # Facets satisfy n.x + b <= 0 with b < 0, so the gauge is max n.x / (-b).
    normals = hull.equations[:, :-1] / (-hull.equations[:, -1:])
    return lambda X: np.max(X @ normals.T, axis=1)


def _unit_gauges(body: ConvexBody, X: np.ndarray, facet_fn=None) -> np.ndarray:
    if body.kind == "ball":
        return np.linalg.norm(X, axis=1)
    if body.kind == "scaled_cube":
        return math.sqrt(body.dim) * np.max(np.abs(X), axis=1)
    if body.kind == "cross_polytope":
        return np.sum(np.abs(X), axis=1)
    if facet_fn is not None:
        return facet_fn(X)
    unit = ConvexBody("vpolytope", body.dim, 1.0, body.vertices)
    return np.array([minkowski_norm(unit, x) for x in X])


# ---------------------------------------------------------------------------
# Gaussian mean width and mean norm


def _gaussian_mean(stat, m: int, samples: int, seed: int) -> tuple[float, float]:
    if isinstance(samples, bool) or int(samples) != samples or samples < 2:
        raise DomainError(f"samples must be an integer >= 2, got {samples!r}")
    samples = int(samples)
    rng = np.random.default_rng(seed)
    vals = []
    done = 0
    while done < samples:
        k = min(_BLOCK, samples - done)
        vals.append(stat(rng.standard_normal((k, m))))
        done += k
    v = np.concatenate(vals)
    mean = float(np.mean(v))
    sd = float(np.std(v, ddof=1))
    return mean, sd / math.sqrt(samples)


def gaussian_width(body: ConvexBody, samples: int, seed: int) -> WidthEstimate:
    """Monte Carlo estimate of ``l*(K) = E h_K(g)`` for standard Gaussian g.

    Deterministic in ``seed``; bodies that differ only in scale see the same
    Gaussian draws, so the estimate of ``rK`` is exactly ``r`` times that of
    the unit-scale body.
    """
    mean, se = _gaussian_mean(lambda G: _unit_support(body, G), body.dim, samples, seed)
    return WidthEstimate(body.scale * mean, body.scale * se, int(samples), seed)


def gaussian_norm_mean(body: ConvexBody, samples: int, seed: int) -> WidthEstimate:
    """Monte Carlo estimate of ``l(K) = E ||g||_K``.

    Refuses bodies that are not full-dimensional, for which ``l(K)`` is
    infinite.
    """
    if not body.is_full_dimensional():
        raise DomainError("body is not full-dimensional; E||g||_K is infinite")
    facet_fn = None
    if body.kind == "vpolytope" and 2 <= body.dim <= _FACET_DIM_CAP:
        try:
            facet_fn = _facet_gauge(body.vertices)
        except QhullError:
            facet_fn = None
    elif body.kind == "vpolytope" and body.dim == 1:
        top = float(np.max(np.abs(body.vertices)))
        facet_fn = lambda X: np.abs(X[:, 0]) / top  # noqa: E731

    def stat(G):
        g = _unit_gauges(body, G, facet_fn)
        if not np.all(np.isfinite(g)):
            raise DomainError("degenerate body: a Gaussian sample lies outside its span")
        return g

    mean, se = _gaussian_mean(stat, body.dim, samples, seed)
    return WidthEstimate(mean / body.scale, se / body.scale, int(samples), seed)


# ---------------------------------------------------------------------------
# Euclidean projection


@dataclass(frozen=True)
class Projection:
    point: np.ndarray
    gap: float
    iterations: int


def _project_l1(y: np.ndarray, radius: float) -> np.ndarray:
    a = np.abs(y)
    if a.sum() <= radius:
        return y.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.flatnonzero(u - (css - radius) / k > 0)[-1]
    theta = (css[rho] - radius) / (rho + 1)
    return np.sign(y) * np.maximum(a - theta, 0.0)


def _pairwise_frank_wolfe(body: ConvexBody, y: np.ndarray, tol: float, max_iter: int):
    A = body.scale * _signed_atoms(body.vertices)  # m x 2k
    n_atoms = A.shape[1]
    k = body.num_vertices
    # Start at the atom maximizing <a, y>.
    s = body.vertices @ y
    i = int(np.argmax(np.abs(s)))
    start = i if s[i] >= 0 else i + k
    weights = np.zeros(n_atoms)
    weights[start] = 1.0
    x = A[:, start].copy()
    gap = math.inf
    for it in range(max_iter):
        grad = 2.0 * (x - y)
        scores = grad @ A
        fw = int(np.argmin(scores))
        gap = float(grad @ x - scores[fw])
        if gap <= tol:
            return x, max(gap, 0.0), it
        active = np.flatnonzero(weights > 0)
        away = int(active[np.argmax(scores[active])])
        d = A[:, fw] - A[:, away]
        dd = float(d @ d)
        if dd == 0.0:
            return x, max(gap, 0.0), it
        step = min(max(-float((x - y) @ d) / dd, 0.0), weights[away])
        weights[fw] += step
        weights[away] -= step
        if weights[away] <= 1e-16:
            weights[away] = 0.0
        x = A @ weights
    grad = 2.0 * (x - y)
    gap = float(grad @ x - np.min(grad @ A))
    if gap <= tol:
        return x, max(gap, 0.0), max_iter
    raise ConvergenceError("projection did not reach the requested duality gap", gap, max_iter)


def project(body: ConvexBody, point, tol: float = 1e-10, max_iter: Optional[int] = None) -> Projection:
    """Euclidean projection with its convergence certificate.

    For vpolytopes a pairwise conditional-gradient method runs until the
    duality gap ``g`` satisfies ``g <= tol``; since ``f(x) - f* <= g`` and
    ``||x - x*||^2 <= f(x) - f*`` for ``f = ||. - y||^2``, the returned point
    is within ``sqrt(tol)`` of the exact projection.  Analytic kinds are
    projected in closed form and report a zero gap.
    """
    y = _vector(body, point, "point")
    if not (tol > 0):
        raise DomainError(f"tol must be positive, got {tol!r}")
    r = body.scale
    if body.kind == "ball":
        nrm = float(np.linalg.norm(y))
        return Projection(y.copy() if nrm <= r else y * (r / nrm), 0.0, 0)
    if body.kind == "scaled_cube":
        half = r / math.sqrt(body.dim)
        return Projection(np.clip(y, -half, half), 0.0, 0)
    if body.kind == "cross_polytope":
        return Projection(_project_l1(y, r), 0.0, 0)
    if minkowski_norm(body, y) <= 1.0:
        return Projection(y.copy(), 0.0, 0)
    if max_iter is None:
        max_iter = 50 * body.dim * body.num_vertices
    x, gap, it = _pairwise_frank_wolfe(body, y, tol, max(int(max_iter), 1))
    return Projection(x, gap, it)


def euclid_project(body: ConvexBody, point, tol: float = 1e-10, max_iter: Optional[int] = None) -> np.ndarray:
    """Point of K within ``sqrt(tol)`` of ``argmin_{x in K} ||x - point||_2``."""
    return project(body, point, tol, max_iter).point


# ---------------------------------------------------------------------------
# linear images


def to_vpolytope(body: ConvexBody, cube_cap: int = CUBE_EXPANSION_CAP) -> ConvexBody:
    """Vertex form of a polytope body (one vertex per antipodal pair)."""
    m = body.dim
    if body.kind == "vpolytope":
        return body
    if body.kind == "ball":
        raise DomainError("the Euclidean ball has no finite vertex description")
    if body.kind == "cross_polytope":
        return ConvexBody("vpolytope", m, body.scale, np.eye(m))
    if m > cube_cap:
        raise DomainError(f"cube of dimension {m} exceeds the vertex expansion cap {cube_cap}")
    # Sign patterns with a leading +1 pick one corner per antipodal pair.
    codes = np.arange(2 ** (m - 1))
    bits = (codes[:, None] >> np.arange(m - 2, -1, -1)) & 1 if m > 1 else np.zeros((1, 0), int)
    signs = np.hstack([np.ones((codes.size, 1)), 1.0 - 2.0 * bits])
    return ConvexBody("vpolytope", m, body.scale, signs / math.sqrt(m))


def apply_linear(body: ConvexBody, T, cube_cap: int = CUBE_EXPANSION_CAP) -> ConvexBody:
    """Image ``T(K)`` for a k x m matrix ``T``; linear images commute with hulls."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[1] != body.dim:
        raise InputError(f"map must have shape (k, {body.dim}), got {T.shape}")
    if not np.all(np.isfinite(T)):
        raise InputError("map must be finite")
    vp = to_vpolytope(body, cube_cap)
    return ConvexBody("vpolytope", T.shape[0], vp.scale, vp.vertices @ T.T)


def project_subspace(body: ConvexBody, basis: SubspaceBasis, cube_cap: int = CUBE_EXPANSION_CAP) -> ConvexBody:
    """Orthogonal projection onto E, expressed in the coordinates of ``basis``."""
    if basis.ambient_dim != body.dim:
        raise InputError(f"basis lives in R^{basis.ambient_dim}, body in R^{body.dim}")
    return apply_linear(body, basis.columns.T, cube_cap)
