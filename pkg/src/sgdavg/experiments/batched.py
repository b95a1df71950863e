"""Lockstep execution of many trials for the built-in oracle factories.

All trials advance together with one vectorized update per iteration over a
stacked (trials, dim) state. Per-trial noise is pre-drawn from each trial's
own RNG stream in exactly the order the scalar oracles consume it, and every
update applies the same elementwise arithmetic as the sequential loop, so
the per-trial results match the sequential runner (bitwise for
one-dimensional problems, up to summation order for dense dot products).

Trajectory recording is not available here; workflows that need stored
iterates use the sequential engine.
"""

from __future__ import annotations

import numpy as np

from ..averaging import suffix_window_start
from ..core import Interval, L2Ball, Problem, Unconstrained, _BALL_SLACK
from ..oracles import (
    BoundedUniformBall,
    GaussianNoise,
    NoNoise,
    QuadraticOracleFactory,
    RngStream,
    SvmOracleFactory,
)
from ..sgd import RunConfig, checkpoint_iterations

__all__ = ["unsupported_reason", "run_all"]

# Pre-drawn noise/index tables are capped to keep memory within ~1.6 GB.
_MAX_PREDRAW = 200_000_000


def unsupported_reason(problem: Problem, oracle_factory, config: RunConfig) -> str | None:
    """None when the batched engine can reproduce the sequential run."""
    if config.record_iterates:
        return "trajectory recording requires the sequential engine"
    if not isinstance(problem.feasible, (Unconstrained, Interval, L2Ball)):
        return f"unsupported feasible set {type(problem.feasible).__name__}"
    if isinstance(oracle_factory, QuadraticOracleFactory):
        noise = oracle_factory.noise
        if isinstance(noise, (NoNoise, GaussianNoise)):
            return None
        if isinstance(noise, BoundedUniformBall):
            if config.x1.shape[0] == 1:
                return None
            return "ball noise draws interleave per query above one dimension"
        return f"unsupported noise model {type(noise).__name__}"
    if isinstance(oracle_factory, SvmOracleFactory):
        d = oracle_factory.dataset
        if d.m * d.n > _MAX_PREDRAW:
            return "dataset too large for a dense row gather"
        return None
    return f"unsupported oracle factory {type(oracle_factory).__name__}"


class _Quadratic:
    def __init__(self, factory: QuadraticOracleFactory, trials, T, dim, base_seed):
        self.mu = factory.mu
        noise = factory.noise
        if isinstance(noise, NoNoise):
            self.noise_table = None
        else:
            if trials * T * dim > _MAX_PREDRAW:
                raise MemoryError("noise pre-draw exceeds the batched engine's cap")
            table = np.empty((trials, T, dim))
            for i in range(trials):
                gen = RngStream(base_seed, i).generator()
                if isinstance(noise, BoundedUniformBall):
                    table[i, :, 0] = gen.uniform(-noise.bound, noise.bound, size=T)
                else:
                    table[i] = noise.sample_batch(T, dim, gen)
            self.noise_table = table

    def ghat(self, X, t):
        G = X if self.mu == 1.0 else self.mu * X
        if self.noise_table is None:
            return G.copy()
        return G - self.noise_table[:, t - 1, :]


class _Svm:
    def __init__(self, factory: SvmOracleFactory, trials, T, base_seed):
        d = factory.dataset
        self.lam = factory.lam
        self.rows = np.asarray(d.matrix().todense(), dtype=np.float64)
        self.labels = d.labels()
        if trials * T > _MAX_PREDRAW:
            raise MemoryError("index pre-draw exceeds the batched engine's cap")
        idx = np.empty((trials, T), dtype=np.int64)
        for i in range(trials):
            gen = RngStream(base_seed, i).generator()
            idx[i] = gen.integers(d.m, size=T)
        self.idx = idx

    def ghat(self, W, t):
        sel = self.idx[:, t - 1]
        Xi = self.rows[sel]
        yi = self.labels[sel]
        margins = np.einsum("ij,ij->i", W, Xi) * yi
        Ghat = self.lam * W
        mask = margins < 1.0
        if mask.any():
            Ghat[mask] -= yi[mask, None] * Xi[mask]
        return Ghat


def _project_batch(feasible, Y):
    if isinstance(feasible, Unconstrained):
        return Y
    if isinstance(feasible, Interval):
        return np.minimum(np.maximum(Y, feasible.lo), feasible.hi)
    D = Y - feasible.center
    nrm = np.sqrt(np.einsum("ij,ij->i", D, D))
    mask = nrm > feasible.radius * (1.0 + _BALL_SLACK)
    if mask.any():
        Y = Y.copy()
        Y[mask] = feasible.center + D[mask] * (feasible.radius / nrm[mask])[:, None]
    return Y


class _StackedAveragers:
    """The four schemes updated over a stacked (trials, dim) state, with the
    same arithmetic as the per-run averagers."""

    def __init__(self, scheme_names, T, suffix_alpha, trials, dim):
        self.names = list(scheme_names)
        self.T = T
        self.suffix_start = suffix_window_start(T, suffix_alpha)
        self.state: dict[str, np.ndarray | None] = {nm: None for nm in self.names}
        self.suffix_count = 0

    def observe(self, X, t):
        for nm in self.names:
            z = self.state[nm]
            if nm == "final":
                self.state[nm] = X
            elif nm == "uniform":
                if t == 1:
                    self.state[nm] = X.copy()
                else:
                    z += (X - z) / t
            elif nm == "nonuniform":
                if t == 1:
                    self.state[nm] = X.copy()
                else:
                    rho = 2.0 / (t + 1.0)
                    self.state[nm] = rho * X + (1.0 - rho) * z
            else:  # suffix
                if t < self.suffix_start:
                    continue
                self.suffix_count += 1
                if self.suffix_count == 1:
                    self.state[nm] = X.copy()
                else:
                    z += (X - z) / self.suffix_count

    def defined(self, nm) -> bool:
        return self.state.get(nm) is not None

    def rows(self, nm) -> np.ndarray:
        return self.state[nm]


def run_all(
    problem: Problem,
    oracle_factory,
    config: RunConfig,
    scheme_names,
    trials: int,
    base_seed: int,
    suffix_alpha: float,
):
    """Same output as mapping the sequential trial runner over all indices."""
    dim = config.x1.shape[0]
    if isinstance(oracle_factory, QuadraticOracleFactory):
        plan = _Quadratic(oracle_factory, trials, config.T, dim, base_seed)
    elif isinstance(oracle_factory, SvmOracleFactory):
        plan = _Svm(oracle_factory, trials, config.T, base_seed)
    else:  # pragma: no cover - guarded by unsupported_reason
        raise TypeError(f"unsupported factory {type(oracle_factory).__name__}")

    X = np.tile(np.asarray(config.x1, dtype=np.float64), (trials, 1))
    avs = _StackedAveragers(scheme_names, config.T, suffix_alpha, trials, dim)
    sched = config.schedule
    denom_scale = problem.mu if sched.mu_scaled else 1.0
    cp_set = set(checkpoint_iterations(config))
    objective = problem.objective
    feasible = problem.feasible

    cp_values: list[tuple[int, dict[str, np.ndarray]]] = []
    for t in range(1, config.T + 1):
        avs.observe(X, t)
        Ghat = plan.ghat(X, t)
        if t in cp_set:
            vals: dict[str, np.ndarray] = {}
            for nm in scheme_names:
                if not avs.defined(nm):
                    continue
                rows = avs.rows(nm)
                vals[nm] = np.array([float(objective(rows[i])) for i in range(trials)])
            cp_values.append((t, vals))
        eta = sched.c / (denom_scale * (t + sched.shift))
        Y = X - eta * Ghat
        if not np.isfinite(Y).all():
            bad = np.nonzero(~np.isfinite(Y).all(axis=1))[0]
            from .harness import TrialFailure

            raise TrialFailure(
                f"trial {int(bad[0])} (base seed {base_seed}, stream index {int(bad[0])}) "
                f"failed: run aborted at iteration {t}: non-finite iterate (NaN/Inf)"
            )
        X = _project_batch(feasible, Y)

    rows = []
    for i in range(trials):
        rows.append(
            [(t, {nm: float(v[i]) for nm, v in vals.items()}) for t, vals in cp_values]
        )
    return rows
