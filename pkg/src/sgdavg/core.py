"""Vectors, feasible sets, problem definitions, and the shared scalar formulas.

Dense vectors are plain float64 numpy arrays. Sparse vectors carry sorted
index/value pairs plus a fixed dimension; they appear as data points only.
Iterates are always dense (one gradient step densifies them anyway).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

__all__ = [
    "InputError",
    "UsageError",
    "SparseVec",
    "Vector",
    "dimension",
    "as_dense",
    "dot",
    "axpy",
    "norm",
    "FeasibleSet",
    "Unconstrained",
    "Interval",
    "L2Ball",
    "project",
    "Problem",
    "StepSchedule",
    "DEFAULT_SCHEDULE",
    "LOWER_BOUND_SCHEDULE",
    "step_size",
    "gamma_weight",
]


class InputError(ValueError):
    """A caller-supplied value violates an operation's preconditions."""


class UsageError(RuntimeError):
    """An object's call protocol was violated (wrong order, missing state)."""


class SparseVec:
    """Sparse real vector: strictly increasing indices below a fixed dimension.

    Explicit zeros are permitted but never required.
    """

    __slots__ = ("indices", "values", "n")

    def __init__(self, indices, values, n: int):
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(values, dtype=np.float64)
        if idx.ndim != 1 or val.ndim != 1 or idx.shape != val.shape:
            raise InputError("indices and values must be 1-D arrays of equal length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise InputError("sparse indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= n:
                raise InputError(f"sparse index out of range for dimension {n}")
        self.indices = idx
        self.values = val
        self.n = int(n)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.indices] = self.values
        return out

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __repr__(self) -> str:
        pairs = ", ".join(f"{i}:{v:g}" for i, v in zip(self.indices, self.values))
        return f"SparseVec({{{pairs}}}, n={self.n})"


Vector = Union[np.ndarray, SparseVec]


def dimension(v: Vector) -> int:
    if isinstance(v, SparseVec):
        return v.n
    return int(np.asarray(v).shape[0])


def as_dense(v: Vector) -> np.ndarray:
    if isinstance(v, SparseVec):
        return v.to_dense()
    return np.asarray(v, dtype=np.float64)


def _check_dims(a: Vector, b: Vector) -> None:
    na, nb = dimension(a), dimension(b)
    if na != nb:
        raise InputError(f"dimension mismatch: {na} vs {nb}")


def dot(a: Vector, b: Vector) -> float:
    """Inner product for any dense/sparse representation pair."""
    _check_dims(a, b)
    a_sp = isinstance(a, SparseVec)
    b_sp = isinstance(b, SparseVec)
    if not a_sp and not b_sp:
        return float(np.dot(a, b))
    if a_sp and not b_sp:
        return float(np.dot(b[a.indices], a.values))
    if b_sp and not a_sp:
        return float(np.dot(a[b.indices], b.values))
    _, ia, ib = np.intersect1d(
        a.indices, b.indices, assume_unique=True, return_indices=True
    )
    return float(np.dot(a.values[ia], b.values[ib]))


def axpy(alpha: float, x: Vector, y: np.ndarray) -> np.ndarray:
    """In-place y += alpha * x; y must be dense."""
    if isinstance(y, SparseVec):
        raise InputError("axpy target must be dense")
    _check_dims(x, y)
    if isinstance(x, SparseVec):
        y[x.indices] += alpha * x.values
    else:
        y += alpha * x
    return y


def norm(v: Vector) -> float:
    if isinstance(v, SparseVec):
        return v.norm()
    return float(np.linalg.norm(v))


class FeasibleSet:
    """A closed convex set with an exact Euclidean projection."""

    def project(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance(self, p: np.ndarray) -> float:
        return float(np.linalg.norm(p - self.project(p)))

    def contains(self, p: np.ndarray, tol: float = 1e-12) -> bool:
        return self.distance(p) <= tol * max(1.0, float(np.linalg.norm(p)))


@dataclass(frozen=True)
class Unconstrained(FeasibleSet):
    def project(self, p: np.ndarray) -> np.ndarray:
        return p


@dataclass(frozen=True)
class Interval(FeasibleSet):
    """The box [lo, hi] applied to every coordinate."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InputError(f"interval requires lo < hi, got [{self.lo}, {self.hi}]")

    def project(self, p: np.ndarray) -> np.ndarray:
        if p.min() >= self.lo and p.max() <= self.hi:
            return p
        return np.minimum(np.maximum(p, self.lo), self.hi)


# Points within this relative slack of an L2 ball boundary count as inside;
# keeps the projection exactly idempotent despite rounding.
_BALL_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class L2Ball(FeasibleSet):
    radius: float
    center: np.ndarray

    def __post_init__(self):
        if not self.radius > 0:
            raise InputError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))

    def project(self, p: np.ndarray) -> np.ndarray:
        if p.shape != self.center.shape:
            raise InputError(
                f"dimension mismatch: point has {p.shape[0]}, ball has {self.center.shape[0]}"
            )
        d = p - self.center
        nrm = float(np.linalg.norm(d))
        if nrm <= self.radius * (1.0 + _BALL_SLACK):
            return p
        return self.center + d * (self.radius / nrm)


def project(s: FeasibleSet, p: np.ndarray) -> np.ndarray:
    """Euclidean projection of p onto s; returns p itself when feasible."""
    p = np.asarray(p, dtype=np.float64)
    return s.project(p)


@dataclass(frozen=True, eq=False)
class Problem:
    """An objective with the curvature/smoothness metadata the solver needs.

    ``objective`` evaluates f; ``subgradient`` returns one deterministic
    element of the subdifferential. ``mu`` is the strong-convexity modulus,
    ``lipschitz`` a bound on subgradient norms over the feasible set
    (math.inf when no finite bound is available). ``optimum`` is the known
    minimizer and its value, when available.
    """

    objective: Callable[[np.ndarray], float]
    subgradient: Callable[[np.ndarray], np.ndarray]
    feasible: FeasibleSet
    mu: float
    lipschitz: float
    optimum: Optional[tuple[np.ndarray, float]] = None
    name: str = "problem"

    def __post_init__(self):
        if not self.mu > 0:
            raise InputError(f"mu must be positive, got {self.mu}")
        if not self.lipschitz >= 0:
            raise InputError(f"lipschitz must be nonnegative, got {self.lipschitz}")
        if self.optimum is not None:
            xstar, fstar = self.optimum
            xstar = np.asarray(xstar, dtype=np.float64)
            object.__setattr__(self, "optimum", (xstar, float(fstar)))
            got = float(self.objective(xstar))
            if abs(got - fstar) > 1e-12 * max(1.0, abs(fstar)):
                raise InputError(
                    f"objective({xstar}) = {got} disagrees with fstar = {fstar}"
                )

    @property
    def xstar(self) -> Optional[np.ndarray]:
        return None if self.optimum is None else self.optimum[0]

    @property
    def fstar(self) -> Optional[float]:
        return None if self.optimum is None else self.optimum[1]

    def gap(self, x: np.ndarray) -> float:
        """f(x) - f(x*), or the raw objective when the optimum is unknown."""
        val = float(self.objective(x))
        return val if self.optimum is None else val - self.optimum[1]


@dataclass(frozen=True)
class StepSchedule:
    """Decaying step sizes c/(mu*(t+shift)) when mu_scaled, else c/(t+shift)."""

    c: float = 2.0
    shift: float = 1.0
    mu_scaled: bool = True

    def __post_init__(self):
        if not self.c > 0:
            raise InputError(f"step numerator must be positive, got {self.c}")
        if not self.shift >= 0:
            raise InputError(f"step shift must be nonnegative, got {self.shift}")


DEFAULT_SCHEDULE = StepSchedule(c=2.0, shift=1.0, mu_scaled=True)
LOWER_BOUND_SCHEDULE = StepSchedule(c=1.0, shift=1.0, mu_scaled=False)


def step_size(s: StepSchedule, mu: float, t: int) -> float:
    if t < 1:
        raise InputError(f"step index must be >= 1, got {t}")
    if s.mu_scaled:
        if not mu > 0:
            raise InputError(f"mu-scaled schedule requires mu > 0, got {mu}")
        return s.c / (mu * (t + s.shift))
    return s.c / (t + s.shift)


def gamma_weight(t: int, T: int) -> float:
    """Triangular weight t / (T*(T+1)/2); over t = 1..T these sum to one."""
    if T < 1:
        raise InputError(f"horizon must be >= 1, got {T}")
    if not 1 <= t <= T:
        raise InputError(f"t must lie in [1, {T}], got {t}")
    return t / (T * (T + 1) / 2.0)
