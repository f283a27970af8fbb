"""Linear query workloads, databases and the sensitivity polytope.

Also houses the Caratheodory machinery used to turn a point of the scaled
sensitivity polytope ``K' = K / sqrt(m)`` into a random pair of element
databases whose answer difference is the point in expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, InputError
from .geometry import ConvexBody, conic_decomposition

#: Default cap on the number of attributes for generated workloads (|U| = 2^d).
ATTRIBUTE_CAP = 16

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Workload:
    """``m`` linear queries over a universe of ``universe_size`` elements.

    ``matrix[q, e]`` is the value of query ``q`` on element ``e``.
    """

    matrix: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float, ndmin=2)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise InputError(f"workload matrix must be m x |U| with m, |U| >= 1, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InputError("workload entries must be finite")
        if A.min() < 0 or A.max() > 1:
            raise InputError("workload entries must lie in [0, 1]")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != A.shape[1]:
                raise InputError(f"expected {A.shape[1]} labels, got {len(labels)}")
            object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def universe_size(self) -> int:
        return self.matrix.shape[1]

    def to_dict(self) -> dict:
        out = {"m": self.m, "universe": self.universe_size, "matrix": self.matrix.tolist()}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Workload":
        if not isinstance(data, dict) or "matrix" not in data:
            raise InputError("workload description must be an object with a 'matrix'")
        try:
            A = np.array(data["matrix"], dtype=float)
        except (TypeError, ValueError):
            raise InputError("workload matrix must be rows of numbers") from None
        w = cls(A, data.get("labels"))
        if data.get("m", w.m) != w.m or data.get("universe", w.universe_size) != w.universe_size:
            raise InputError("declared m/universe disagree with the matrix shape")
        return w


@dataclass(frozen=True, eq=False)
class Database:
    """A multiset of universe elements or of points in R^m.

    Rows are stored once with a multiplicity each; ``size`` counts
    repetitions.  Exactly one of ``elements`` and ``points`` is set.
    """

    elements: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if (self.elements is None) == (self.points is None):
            raise InputError("a database holds either elements or points")
        if self.elements is not None:
            e = np.asarray(self.elements)
            if e.size and not np.issubdtype(e.dtype, np.integer):
                if not np.all(np.mod(e, 1) == 0):
                    raise InputError("element indices must be integers")
            e = e.astype(np.int64).reshape(-1)
            if e.size and e.min() < 0:
                raise InputError("element indices must be non-negative")
            object.__setattr__(self, "elements", e)
            k = e.size
        else:
            p = np.array(self.points, dtype=float, ndmin=2)
            if self.points is not None and np.asarray(self.points).size == 0:
                p = np.zeros((0, p.shape[1] if p.ndim == 2 else 0))
            if p.ndim != 2:
                raise InputError("points must be a 2-D array")
            if not np.all(np.isfinite(p)):
                raise InputError("points must be finite")
            object.__setattr__(self, "points", p)
            k = p.shape[0]
        c = np.ones(k, dtype=np.int64) if self.counts is None else np.asarray(self.counts)
        if c.shape != (k,) or (c.size and (c.min() < 1 or not np.all(np.mod(c, 1) == 0))):
            raise InputError("counts must be positive integers, one per row")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @classmethod
    def from_elements(cls, elements: Sequence[int], counts=None) -> "Database":
        return cls(elements=np.asarray(elements), counts=counts)

    @classmethod
    def from_points(cls, points, counts=None) -> "Database":
        return cls(points=points, counts=counts)

    @property
    def size(self) -> int:
        return int(self.counts.sum())

    @property
    def is_elements(self) -> bool:
        return self.elements is not None

    def mean(self) -> np.ndarray:
        """Mean point of a point database."""
        if self.points is None:
            raise InputError("mean() needs a point database")
        if self.size == 0:
            raise DomainError("empty database")
        return (self.counts @ self.points) / self.size

    def repeated(self, k: int) -> "Database":
        """The database with every multiplicity multiplied by ``k``."""
        return Database(self.elements, self.points, self.counts * int(k))

    def to_dict(self) -> dict:
        if self.elements is not None:
            return {"elements": np.repeat(self.elements, self.counts).tolist()}
        return {"points": np.repeat(self.points, self.counts, axis=0).tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Database":
        if not isinstance(data, dict):
            raise InputError("database description must be a JSON object")
        if "elements" in data and "points" not in data:
            el = data["elements"]
            if not isinstance(el, list) or not all(
                isinstance(x, int) and not isinstance(x, bool) for x in el
            ):
                raise InputError("elements must be a list of integer indices")
            return cls.from_elements(np.array(el, dtype=np.int64))
        if "points" in data and "elements" not in data:
            try:
                pts = np.array(data["points"], dtype=float)
            except (TypeError, ValueError):
                raise InputError("points must be rows of numbers") from None
            if pts.ndim != 2:
                raise InputError("points must be a list of equal-length rows")
            return cls.from_points(pts)
        raise InputError("database needs exactly one of 'elements' or 'points'")


def _check_elements(workload: Workload, db: Database) -> None:
    if not db.is_elements:
        raise InputError("expected an element database")
    if db.elements.size and db.elements.max() >= workload.universe_size:
        raise InputError(
            f"element index {int(db.elements.max())} outside universe of size {workload.universe_size}"
        )


def evaluate(workload: Workload, db: Database) -> np.ndarray:
    """Answer vector ``Q(D)``: per-query averages over the database."""
    _check_elements(workload, db)
    if db.size == 0:
        raise DomainError("cannot evaluate queries on an empty database")
    return (workload.matrix[:, db.elements] @ db.counts) / db.size


def _answers_or_zero(workload: Workload, db: Database) -> np.ndarray:
    # Q(empty) is taken to be 0, the linear extension used by the reduction.
    if db.size == 0:
        return np.zeros(workload.m)
    return evaluate(workload, db)


def sensitivity_polytope(workload: Workload, scaled: bool = False) -> ConvexBody:
    """``K = conv{±Q({e})}``, or ``K' = K / sqrt(m)`` when ``scaled``."""
    scale = 1.0 / math.sqrt(workload.m) if scaled else 1.0
    return ConvexBody("vpolytope", workload.m, scale, workload.matrix.T.copy())


def one_way_marginals(d: int, cap: int = ATTRIBUTE_CAP) -> Workload:
    """The d attribute queries over {0,1}^d; query j reads bit j of an element."""
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise DomainError(f"number of attributes must be a positive integer, got {d!r}")
    if d > cap:
        raise DomainError(f"{d} attributes exceed the universe cap of {cap}")
    e = np.arange(2**d)
    bits = (e[None, :] >> np.arange(d)[:, None]) & 1
    labels = [format(x, f"0{d}b")[::-1] for x in e]
    return Workload(bits.astype(float), labels)


def random_workload(m: int, universe_size: int, rng: np.random.Generator, binary: bool = False) -> Workload:
    """Workload with i.i.d. uniform (or Bernoulli(1/2)) entries."""
    if binary:
        return Workload(rng.integers(0, 2, size=(m, universe_size)).astype(float))
    return Workload(rng.random((m, universe_size)))


# ---------------------------------------------------------------------------
# Caratheodory decomposition and signed sampling


@dataclass(frozen=True, eq=False)
class SignedCombination:
    """``target = (1/sqrt(m)) * sum_j weight_j * Q({element_j})`` with ``sum |weight_j| = 1``."""

    elements: np.ndarray
    weights: np.ndarray
    target: np.ndarray

    def reconstruct(self, workload: Workload) -> np.ndarray:
        return workload.matrix[:, self.elements] @ self.weights / math.sqrt(workload.m)

    @property
    def support(self) -> int:
        return int(self.elements.size)


def caratheodory_decompose(workload: Workload, point) -> SignedCombination:
    """Write a point of ``K'`` as a signed combination of at most m+1 scaled columns.

    A minimum-gauge signed conic combination is found by linear programming
    and reduced to linearly independent atoms (at most m).  Any weight
    deficit ``1 - gauge`` is split evenly between ``+`` and ``-`` copies of
    the lowest-index element in the support (element 0 if the support is
    empty), which keeps the point fixed and adds at most one term.  The
    result is a deterministic function of the point.
    """
    m = workload.m
    x = np.asarray(point, dtype=float)
    if x.shape != (m,) or not np.all(np.isfinite(x)):
        raise InputError(f"point must be a finite vector of length {m}")
    k = workload.universe_size
    cols = workload.matrix.T  # one row per universe element
    gauge, atoms, w = conic_decomposition(cols, math.sqrt(m) * x)
    if gauge > 1.0 + MEMBERSHIP_TOL:
        raise DomainError(f"point lies outside K' (gauge {gauge:.12g})")
    elements = np.where(atoms < k, atoms, atoms - k)
    weights = np.where(atoms < k, w, -w)
    order = np.lexsort((weights < 0, elements))
    elements, weights = elements[order], weights[order]
    slack = 1.0 - float(np.abs(weights).sum())
    if slack > 0:
        e0 = int(elements[0]) if elements.size else 0
        half = 0.5 * slack
        if elements.size:
            # Grow the existing term for e0 and add its opposite-sign partner.
            sign0 = 1.0 if weights[0] >= 0 else -1.0
            weights = weights.copy()
            weights[0] += sign0 * half
            elements = np.insert(elements, 1, e0)
            weights = np.insert(weights, 1, -sign0 * half)
        else:
            elements = np.array([e0, e0])
            weights = np.array([half, -half])
    return SignedCombination(elements.astype(np.int64), weights.astype(float), x.copy())


def sample_signed_databases(combos: Sequence[SignedCombination], seed: int) -> tuple[Database, Database]:
    """Draw ``(D+, D-)``: one term per combination with probability ``|weight|``.

    The uniform draw for combination ``i`` is entry ``i`` of a single stream
    seeded by ``seed``, so the outcome for each point depends only on
    ``(seed, i)``.  Terms with non-negative weight go to ``D+``.
    """
    n = len(combos)
    u = np.random.default_rng(seed).random(n)
    plus, minus = [], []
    for i, c in enumerate(combos):
        cdf = np.cumsum(np.abs(c.weights))
        j = min(int(np.searchsorted(cdf, u[i] * cdf[-1], side="right")), cdf.size - 1)
        (plus if c.weights[j] >= 0 else minus).append(int(c.elements[j]))
    return (
        Database.from_elements(np.array(plus, dtype=np.int64)),
        Database.from_elements(np.array(minus, dtype=np.int64)),
    )
