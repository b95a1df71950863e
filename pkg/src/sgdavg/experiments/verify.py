"""Numeric checks of the trajectory inequalities behind the convergence
analysis. Each verifier consumes a recorded trajectory with the oracle's
exact noise decomposition and checks an inequality that holds surely
(probability one), so any violation beyond float tolerance is a bug.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..averaging import make_averager
from ..core import DEFAULT_SCHEDULE, InputError, Interval
from ..oracles import (
    BoundedUniformBall,
    GaussianNoise,
    QuadraticOracle,
    RngStream,
    empirical_mgf_check,
    gaussian_mgf_exact,
    quadratic_problem,
)
from ..sgd import RunConfig, run_sgd

__all__ = [
    "CheckResult",
    "telescoping_product_coeff",
    "literal_telescoping_product",
    "product_identity_sweep",
    "verify_diameter_bound",
    "verify_recursive_bound",
    "chicken_and_egg_coefficients",
    "verify_chicken_and_egg",
    "fleet_trajectories",
    "run_verification_fleet",
]


@dataclass(eq=False)
class CheckResult:
    """Outcome of one verifier: the headline scalar, its pass boundary, and
    auxiliary measurements."""

    name: str
    value: float
    threshold: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: value={self.value:.6e} threshold={self.threshold:.6e}"


def telescoping_product_coeff(i: int, t: int) -> float:
    """Closed form of prod_{j=i+1..t} (1 - 4/(j+1)) for 3 <= i <= t:
    (i-2)(i-1)i(i+1) / ((t-2)(t-1)t(t+1)). Equals 1 at i = t."""
    if i < 3:
        raise InputError(f"i must be >= 3 (the formula hits zero factors), got {i}")
    if t < i:
        raise InputError(f"need i <= t, got i={i}, t={t}")
    num = (i - 2.0) * (i - 1.0) * i * (i + 1.0)
    den = (t - 2.0) * (t - 1.0) * t * (t + 1.0)
    return num / den


def literal_telescoping_product(i: int, t: int) -> float:
    """Brute-force factor-by-factor product; the oracle the closed form is
    checked against."""
    if i < 3 or t < i:
        raise InputError(f"need 3 <= i <= t, got i={i}, t={t}")
    p = 1.0
    for j in range(i + 1, t + 1):
        p *= 1.0 - 4.0 / (j + 1.0)
    return p


def product_identity_sweep(max_t: int = 200) -> CheckResult:
    """Closed form versus the literal product over all 3 <= i < t <= max_t."""
    worst = 0.0
    worst_pair = (3, 4)
    for t in range(4, max_t + 1):
        for i in range(3, t):
            lit = literal_telescoping_product(i, t)
            closed = telescoping_product_coeff(i, t)
            err = abs(closed - lit) / max(abs(lit), 1e-300)
            if err > worst:
                worst = err
                worst_pair = (i, t)
    return CheckResult(
        name="product-identity",
        value=worst,
        threshold=1e-12,
        passed=worst <= 1e-12,
        detail={"max_t": max_t, "worst_pair": list(worst_pair)},
    )


def _trajectory_arrays(trajectory, xstar, need_decomposition=True):
    if trajectory is None or len(trajectory) == 0:
        raise InputError("a recorded trajectory is required")
    if xstar is None:
        raise InputError("the problem optimum is required")
    X = np.stack([x for x, _ in trajectory])
    D = X - np.asarray(xstar, dtype=np.float64)
    if not need_decomposition:
        return X, D, None, None
    if any(s.zhat is None or s.g is None for _, s in trajectory):
        raise InputError("trajectory lacks the oracle's noise decomposition")
    Z = np.stack([s.zhat for _, s in trajectory])
    Ghat = np.stack([s.ghat for _, s in trajectory])
    return X, D, Z, Ghat


def verify_diameter_bound(trajectory, L: float, mu: float, xstar) -> CheckResult:
    """Worst ratio of iterate-to-optimum distance against 2L/mu."""
    if not math.isfinite(L):
        raise InputError("a finite Lipschitz bound is required")
    _, D, _, _ = _trajectory_arrays(trajectory, xstar, need_decomposition=False)
    dists = np.linalg.norm(D, axis=1)
    bound = 2.0 * L / mu
    ratio = float(dists.max() / bound)
    return CheckResult(
        name="diameter-bound",
        value=ratio,
        threshold=1.0 + 1e-9,
        passed=ratio <= 1.0 + 1e-9,
        detail={"worst_distance": float(dists.max()), "bound": bound},
    )


def _neumaier():
    """Compensated accumulator: returns (add, total) closures."""
    state = [0.0, 0.0]  # running sum, compensation

    def add(x: float) -> None:
        s = state[0] + x
        if abs(state[0]) >= abs(x):
            state[1] += (state[0] - s) + x
        else:
            state[1] += (x - s) + state[0]
        state[0] = s

    def total() -> float:
        return state[0] + state[1]

    return add, total


def verify_recursive_bound(trajectory, mu: float, xstar) -> CheckResult:
    """Checks, for every t in [4, T-1], that the squared distance to the
    optimum at step t+1 is dominated by the telescoped weighted sums of
    noise inner products and exact squared gradient norms:

        ||x_{t+1} - x*||^2 <= (4/mu) sum_{i=3..t} a_i(t) <zhat_i, x_i - x*>
                            + (4/mu^2) sum_{i=3..t} b_i(t) ||ghat_i||^2

    with a_i(t) = coeff(i,t)/(i+1) and b_i(t) = coeff(i,t)/(i+1)^2. Returns
    the minimum slack (RHS - LHS); passes when every slack clears
    -1e-9 times the local term magnitude.
    """
    X, D, Z, Ghat = _trajectory_arrays(trajectory, xstar)
    T = X.shape[0]
    if T < 5:
        raise InputError(f"need at least 5 recorded steps, got {T}")
    u = np.einsum("ij,ij->i", Z, D)  # <zhat_t, x_t - x*>, index t-1
    h = np.einsum("ij,ij->i", Ghat, Ghat)
    dist2 = np.einsum("ij,ij->i", D, D)

    # Both sums share the factor 1/((t-2)(t-1)t(t+1)); accumulate the
    # numerators N(i) * u_i/(i+1) and N(i) * h_i/(i+1)^2 once, with
    # compensation (they span several orders of magnitude in i).
    add_a, tot_a = _neumaier()
    add_abs, tot_abs = _neumaier()
    add_b, tot_b = _neumaier()

    min_slack = math.inf
    min_norm_slack = math.inf
    passed = True
    worst_t = None
    four_over_mu = 4.0 / mu
    four_over_mu2 = 4.0 / (mu * mu)
    for i in range(3, T):  # i indexes iterates 3..T-1 as inner-sum terms
        n_i = (i - 2.0) * (i - 1.0) * i * (i + 1.0)
        term_a = n_i * u[i - 1] / (i + 1.0)
        add_a(term_a)
        add_abs(abs(term_a))
        add_b(n_i * h[i - 1] / ((i + 1.0) * (i + 1.0)))
        t = i
        if t < 4 or t + 1 > T:
            continue
        den = (t - 2.0) * (t - 1.0) * t * (t + 1.0)
        rhs = four_over_mu * tot_a() / den + four_over_mu2 * tot_b() / den
        lhs = dist2[t]  # ||x_{t+1} - x*||^2 at array index t
        scale = four_over_mu * tot_abs() / den + four_over_mu2 * tot_b() / den + lhs
        slack = rhs - lhs
        if slack < min_slack:
            min_slack = slack
            worst_t = t
        norm_slack = slack / scale if scale > 0 else slack
        min_norm_slack = min(min_norm_slack, norm_slack)
        if slack < -1e-9 * scale:
            passed = False
    return CheckResult(
        name="recursive-bound",
        value=min_slack,
        threshold=-1e-9,
        passed=passed,
        detail={"min_normalized_slack": min_norm_slack, "worst_t": worst_t, "T": T},
    )


def chicken_and_egg_coefficients(T: int, mu: float, L: float) -> tuple[np.ndarray, float]:
    """Constructive weights alpha_i and constant beta of the self-bounding
    inequality  V_T <= sum_i alpha_i * d_i + beta,  where
    V_T = sum_t t^2 ||x_t - x*||^2 and d_i = i * <zhat_i, x_i - x*>:

        alpha_i = (4/mu) sum_{t=i+1..T} t^2 a_i(t-1) / i        (3 <= i <= T-1)
        beta    = (4(L+1)^2/mu^2) sum_{t=4..T} t^2 sum_{i=3..t-1} b_i(t-1)
                  + 56 L^2 / mu^2

    with alpha_1 = alpha_2 = alpha_T = 0. Sums are compensated; they span
    several orders of magnitude in t.
    """
    if T < 5:
        raise InputError(f"need T >= 5, got {T}")
    alpha = np.zeros(T + 1)

    def den(t):  # (t-2)(t-1)t(t+1), the shared denominator at horizon t
        return (t - 2.0) * (t - 1.0) * t * (t + 1.0)

    # alpha: backward suffix sums of t^2 / den(t-1), one shared accumulator
    add_r, tot_r = _neumaier()
    for i in range(T - 1, 2, -1):
        add_r((i + 1.0) * (i + 1.0) / den(i))  # term t = i+1
        n_i = (i - 2.0) * (i - 1.0) * i * (i + 1.0)
        alpha[i] = (4.0 / mu) * n_i / (i * (i + 1.0)) * tot_r()

    # beta: prefix sums of N(i)/(i+1)^2 feed the inner sum at each t
    add_p, tot_p = _neumaier()
    beta_terms = []
    for t in range(4, T + 1):
        i = t - 1
        n_i = (i - 2.0) * (i - 1.0) * i * (i + 1.0)
        add_p(n_i / ((i + 1.0) * (i + 1.0)))
        beta_terms.append(t * t * tot_p() / den(t - 1))
    beta = (4.0 * (L + 1.0) ** 2 / (mu * mu)) * math.fsum(beta_terms)
    beta += 56.0 * L * L / (mu * mu)
    return alpha, beta


def verify_chicken_and_egg(
    trajectory, mu: float, L: float, xstar, beta_scale: float = 1.0
) -> CheckResult:
    """Checks the self-bounding inequality V_T <= sum_i alpha_i d_i + beta
    on a bounded-noise trajectory (requires ||zhat_t|| <= 1). Returns the
    slack (bound - V_T); passes when it clears -1e-9 * beta.

    ``beta_scale`` rescales beta and exists as a negative-control hook.
    """
    if not math.isfinite(L):
        raise InputError("a finite Lipschitz bound is required")
    X, D, Z, Ghat = _trajectory_arrays(trajectory, xstar)
    T = X.shape[0]
    if T < 5:
        raise InputError(f"need at least 5 recorded steps, got {T}")
    znorms = np.linalg.norm(Z, axis=1)
    if znorms.max() > 1.0 + 1e-12:
        raise InputError(
            f"bounded noise (||zhat|| <= 1) required, saw {znorms.max():.6g}"
        )
    u = np.einsum("ij,ij->i", Z, D)
    dist2 = np.einsum("ij,ij->i", D, D)
    ts = np.arange(1, T + 1, dtype=np.float64)
    v_total = math.fsum((ts * ts * dist2).tolist())

    alpha, beta = chicken_and_egg_coefficients(T, mu, L)
    beta *= beta_scale
    d = ts * u  # d_i = i * <zhat_i, x_i - x*>
    bound = math.fsum((alpha[1 : T + 1] * d).tolist()) + beta
    slack = bound - v_total
    threshold = -1e-9 * beta
    return CheckResult(
        name="chicken-and-egg",
        value=slack,
        threshold=threshold,
        passed=slack >= threshold,
        detail={
            "v_total": v_total,
            "beta": beta,
            "max_alpha": float(alpha.max()),
            "T": T,
        },
    )


def fleet_trajectories(
    runs: int = 20,
    T: int = 2000,
    base_seed: int = 20260810,
    noise_bound: float = 1.0,
    x1: float = 6.0,
):
    """Seeded bounded-noise quadratic runs on [-6, 6] with trajectories
    recorded: the standard fixture the inequality verifiers are checked on.
    Yields (problem, record) pairs."""
    problem = quadratic_problem(1, mu=1.0, feasible=Interval(-6.0, 6.0))
    config = RunConfig(
        T=T,
        schedule=DEFAULT_SCHEDULE,
        x1=np.array([x1]),
        eval_every=T,
        record_iterates=True,
    )
    noise = BoundedUniformBall(noise_bound)
    for i in range(runs):
        oracle = QuadraticOracle(noise, RngStream(base_seed, i))
        record = run_sgd(problem, oracle, config, [make_averager("nonuniform")])
        yield problem, record


_FLEET_CHECKS = ("diameter", "recursive", "chicken-and-egg", "product-identity", "mgf")


def run_verification_fleet(
    runs: int = 20,
    T: int = 2000,
    base_seed: int = 20260810,
    noise_bound: float = 1.0,
    only: Optional[list[str]] = None,
    beta_scale: float = 1.0,
    mgf_samples: int = 10**6,
    product_max_t: int = 200,
) -> list[CheckResult]:
    """The full verifier fleet over the standard seeded trajectories; the
    trajectory checks aggregate the worst case across runs."""
    selected = list(only) if only else list(_FLEET_CHECKS)
    for s in selected:
        if s not in _FLEET_CHECKS:
            raise InputError(f"unknown check {s!r}; expected one of {_FLEET_CHECKS}")
    results: list[CheckResult] = []

    traj_checks = {"diameter", "recursive", "chicken-and-egg"} & set(selected)
    if traj_checks:
        worst: dict[str, CheckResult] = {}
        for problem, record in fleet_trajectories(runs, T, base_seed, noise_bound):
            traj = record.trajectory
            L, mu, xstar = problem.lipschitz, problem.mu, problem.xstar
            if "diameter" in traj_checks:
                r = verify_diameter_bound(traj, L, mu, xstar)
                if "diameter" not in worst or r.value > worst["diameter"].value:
                    worst["diameter"] = r
            if "recursive" in traj_checks:
                r = verify_recursive_bound(traj, mu, xstar)
                if "recursive" not in worst or r.value < worst["recursive"].value:
                    worst["recursive"] = r
            if "chicken-and-egg" in traj_checks:
                r = verify_chicken_and_egg(traj, mu, L, xstar, beta_scale=beta_scale)
                if (
                    "chicken-and-egg" not in worst
                    or r.value < worst["chicken-and-egg"].value
                ):
                    worst["chicken-and-egg"] = r
        for key in ("diameter", "recursive", "chicken-and-egg"):
            if key in worst:
                res = worst[key]
                res.detail["runs"] = runs
                results.append(res)

    if "product-identity" in selected:
        results.append(product_identity_sweep(max_t=product_max_t))

    if "mgf" in selected:
        for n in (1, 50):
            est = empirical_mgf_check(
                GaussianNoise(1.0), 2.0, n, mgf_samples, RngStream(base_seed, 10_000 + n)
            )
            exact = gaussian_mgf_exact(1.0, 2.0, n)
            err = abs(est - exact)
            results.append(
                CheckResult(
                    name=f"mgf-gaussian-n{n}",
                    value=est,
                    threshold=2.0,
                    passed=err <= 0.05 and est <= 2.0,
                    detail={"exact": exact, "abs_error": err, "samples": mgf_samples},
                )
            )
    return results
