"""The projected stochastic subgradient descent loop.

Each step queries the oracle at the current iterate x_t, takes the step
y_{t+1} = x_t - eta_t * ghat_t, and projects back onto the feasible set.
Averaging schemes observe x_t (the pre-update iterate) for t = 1..T, so the
reported averages cover exactly x_1..x_T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .averaging import Averager, WindowNotStarted
from .core import InputError, Problem, StepSchedule
from .oracles import GradientSample

__all__ = ["RunAborted", "RunConfig", "RunRecord", "run_sgd", "checkpoint_iterations"]


class RunAborted(RuntimeError):
    """A run hit a non-finite iterate or a failing oracle; names the iteration."""

    def __init__(self, iteration: int, reason: str):
        self.iteration = iteration
        super().__init__(f"run aborted at iteration {iteration}: {reason}")


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Horizon, step schedule, start point, and recording options for one run.

    ``eval_every`` is the checkpoint period in iterations (for dataset
    problems one "effective pass" is m iterations); the final iteration is
    always a checkpoint. ``record_iterates`` stores the full trajectory for
    the verifiers, which is O(T * n) memory and meant for small T.
    """

    T: int
    schedule: StepSchedule
    x1: np.ndarray
    eval_every: Optional[int] = None
    record_iterates: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise InputError(f"horizon must be >= 1, got {self.T}")
        object.__setattr__(self, "x1", np.asarray(self.x1, dtype=np.float64))
        ev = self.eval_every if self.eval_every is not None else self.T
        if ev < 1:
            raise InputError(f"eval_every must be >= 1, got {ev}")
        object.__setattr__(self, "eval_every", int(ev))


def checkpoint_iterations(config: RunConfig) -> list[int]:
    """Multiples of eval_every within [1, T], always including T."""
    pts = list(range(config.eval_every, config.T + 1, config.eval_every))
    if not pts or pts[-1] != config.T:
        pts.append(config.T)
    return pts


@dataclass(eq=False)
class RunRecord:
    """Per-run artifacts: final report per scheme, checkpoint objective
    values (schemes whose report is not yet defined are absent from a
    checkpoint's map), and optionally the stored trajectory."""

    reported: dict[str, np.ndarray]
    checkpoints: list[tuple[int, dict[str, float]]]
    trajectory: Optional[list[tuple[np.ndarray, GradientSample]]] = None


def run_sgd(
    problem: Problem,
    oracle,
    config: RunConfig,
    schemes: list[Averager],
) -> RunRecord:
    """Execute exactly T oracle queries of projected subgradient descent.

    Aborts with RunAborted on a failing oracle or a non-finite iterate,
    naming the iteration. Checkpoint values use the full deterministic
    objective of each scheme's current report.
    """
    if not schemes:
        raise InputError("at least one averaging scheme is required")
    names = [a.name for a in schemes]
    if len(set(names)) != len(names):
        raise InputError(f"duplicate scheme names: {names}")

    x = np.array(config.x1, dtype=np.float64)
    feasible = problem.feasible
    if feasible.distance(x) > 1e-12 * max(1.0, float(np.linalg.norm(x))):
        raise InputError("x1 must be feasible for the problem's set")

    sched = config.schedule
    c = sched.c
    shift = sched.shift
    denom_scale = problem.mu if sched.mu_scaled else 1.0
    if sched.mu_scaled and not problem.mu > 0:
        raise InputError("mu-scaled schedule requires mu > 0")

    cp_set = set(checkpoint_iterations(config))
    checkpoints: list[tuple[int, dict[str, float]]] = []
    trajectory: Optional[list] = [] if config.record_iterates else None
    objective = problem.objective
    query = oracle.query
    proj = feasible.project

    for t in range(1, config.T + 1):
        for av in schemes:
            av.observe(x, t)
        try:
            sample = query(x, t)
        except Exception as exc:
            raise RunAborted(t, f"oracle failure: {exc}") from exc
        if trajectory is not None:
            trajectory.append((x, sample))
        if t in cp_set:
            vals: dict[str, float] = {}
            for av in schemes:
                try:
                    vals[av.name] = float(objective(av.report()))
                except WindowNotStarted:
                    continue
            checkpoints.append((t, vals))
        eta = c / (denom_scale * (t + shift))
        y = x - eta * sample.ghat
        if not math.isfinite(float(y.sum())):
            raise RunAborted(t, "non-finite iterate (NaN/Inf)")
        x = proj(y)

    reported = {av.name: av.report() for av in schemes}
    return RunRecord(reported=reported, checkpoints=checkpoints, trajectory=trajectory)
