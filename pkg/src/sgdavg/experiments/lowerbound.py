"""Exact law of the weighted report under the adversarial oracle, and the
simulation-versus-enumeration comparison.

With the 1/(t+1) step sizes, start 0, and the adversarial noise, the
weighted report collapses to (1/2) * (mean of the T/4 realized signs), so
its objective value has an exactly enumerable distribution. The simulator
runs the full SGD pipeline and measures the Kolmogorov distance to that law.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..averaging import NonUniformAverage
from ..core import InputError, Interval, LOWER_BOUND_SCHEDULE
from ..oracles import LowerBoundOracle, RngStream, quadratic_problem
from ..sgd import RunConfig, RunRecord, run_sgd

__all__ = [
    "lb_exact_distribution_rational",
    "lb_exact_distribution",
    "lb_problem",
    "lb_run_config",
    "iterate_identity_error",
    "kolmogorov_gap",
    "LbMatchResult",
    "lb_simulate_and_match",
    "lb_exceedance_probability",
]

_MAX_ENUM_T = 60  # 2^(T/4) outcomes; keeps enumeration under 2^15


def lb_exact_distribution_rational(T: int) -> list[tuple[Fraction, Fraction]]:
    """Exact pmf of the reported objective value, enumerated over all
    2^(T/4) sign patterns; values and probabilities are exact rationals."""
    if T % 4 != 0 or T < 4:
        raise InputError(f"horizon must be a positive multiple of 4, got {T}")
    if T > _MAX_ENUM_T:
        raise InputError(f"horizon {T} too large to enumerate (max {_MAX_ENUM_T})")
    m = T // 4
    counts: Counter[int] = Counter()
    for pattern in range(1 << m):
        k = 2 * bin(pattern).count("1") - m  # sum of m signs
        counts[k] += 1
    total = 1 << m
    pmf: dict[Fraction, Fraction] = {}
    for k, c in counts.items():
        value = Fraction(1, 2) * Fraction(k, T // 2) ** 2
        pmf[value] = pmf.get(value, Fraction(0)) + Fraction(c, total)
    return sorted(pmf.items())


def lb_exact_distribution(T: int) -> list[tuple[float, Fraction]]:
    """Same pmf with float values (probabilities stay rational)."""
    return [(float(v), p) for v, p in lb_exact_distribution_rational(T)]


def lb_problem():
    """f(x) = x^2/2 on [-6, 6]; the adversarial construction's setting."""
    return quadratic_problem(1, mu=1.0, feasible=Interval(-6.0, 6.0))


def lb_run_config(T: int, record: bool = True) -> RunConfig:
    return RunConfig(
        T=T,
        schedule=LOWER_BOUND_SCHEDULE,
        x1=np.zeros(1),
        eval_every=T,
        record_iterates=record,
    )


def iterate_identity_error(record: RunRecord) -> float:
    """max_t |x_t - (1/t) * sum_{i<t} zhat_i| over the stored trajectory."""
    if record.trajectory is None:
        raise InputError("trajectory recording is required for the identity check")
    xs = np.array([x[0] for x, _ in record.trajectory])
    zs = np.array([s.zhat[0] for _, s in record.trajectory])
    T = xs.size
    partial = np.concatenate(([0.0], np.cumsum(zs[:-1])))
    predicted = partial / np.arange(1, T + 1)
    return float(np.max(np.abs(xs - predicted)))


def kolmogorov_gap(samples, pmf: list[tuple[float, Fraction]]) -> float:
    """Maximum absolute CDF difference between an empirical sample and an
    exact discrete pmf. Sample values within 1e-9 of a support point are
    snapped onto it."""
    samples = np.asarray(samples, dtype=np.float64)
    support = np.array([v for v, _ in pmf])
    probs = np.array([float(p) for _, p in pmf])
    snapped = samples.copy()
    if support.size:
        pos = np.clip(np.searchsorted(support, samples), 0, support.size - 1)
        left = np.clip(pos - 1, 0, support.size - 1)
        for cand in (pos, left):
            close = np.abs(support[cand] - snapped) <= 1e-9
            snapped = np.where(close, support[cand], snapped)
    points = np.union1d(support, snapped)
    emp = np.searchsorted(np.sort(snapped), points, side="right") / snapped.size
    exact = np.array([float(probs[support <= x].sum()) for x in points])
    return float(np.max(np.abs(emp - exact)))


@dataclass(eq=False)
class LbMatchResult:
    kolmogorov_gap: float
    max_identity_error: float
    objective_values: np.ndarray


def lb_simulate_and_match(T: int, trials: int, base_seed: int) -> LbMatchResult:
    """Run the full pipeline (quadratic problem on [-6,6], adversarial
    oracle, 1/(t+1) steps, x1 = 0) for ``trials`` streams and compare the
    reported objective's empirical law against the exact enumeration."""
    if trials < 1:
        raise InputError(f"need at least one trial, got {trials}")
    exact = lb_exact_distribution(T)
    problem = lb_problem()
    config = lb_run_config(T, record=True)
    values = np.empty(trials)
    worst_identity = 0.0
    for i in range(trials):
        oracle = LowerBoundOracle(T, RngStream(base_seed, i))
        record = run_sgd(problem, oracle, config, [NonUniformAverage()])
        values[i] = problem.objective(record.reported["nonuniform"])
        worst_identity = max(worst_identity, iterate_identity_error(record))
    gap = kolmogorov_gap(values, exact)
    return LbMatchResult(
        kolmogorov_gap=gap, max_identity_error=worst_identity, objective_values=values
    )


def lb_exceedance_probability(T: int, delta: float) -> tuple[float, Fraction]:
    """P[f(report) >= log(1/delta)/(9T)] under the exact law; returns the
    threshold and the exact probability."""
    if not 0.0 < delta < 1.0:
        raise InputError(f"delta must lie in (0, 1), got {delta}")
    threshold = math.log(1.0 / delta) / (9.0 * T)
    prob = Fraction(0)
    for v, p in lb_exact_distribution(T):
        if v >= threshold:
            prob += p
    return threshold, prob
