import math
from fractions import Fraction

import numpy as np
import pytest

from sgdavg.core import DEFAULT_SCHEDULE, InputError, Interval
from sgdavg.data import synthetic_separable_dataset
from sgdavg.oracles import (
    BoundedUniformBall,
    LowerBoundOracle,
    NoNoise,
    QuadraticOracle,
    QuadraticOracleFactory,
    RngStream,
    SvmOracleFactory,
    quadratic_problem,
    svm_problem,
)
from sgdavg.sgd import RunConfig, run_sgd
from sgdavg.averaging import make_averager
from sgdavg.experiments import (
    TrialMatrix,
    chicken_and_egg_coefficients,
    empirical_quantile,
    export_csv,
    import_csv,
    iterate_identity_error,
    kolmogorov_gap,
    lb_exact_distribution,
    lb_exact_distribution_rational,
    lb_problem,
    lb_run_config,
    lb_simulate_and_match,
    literal_telescoping_product,
    product_identity_sweep,
    render_svg,
    run_trials,
    run_verification_fleet,
    tail_fit,
    telescoping_product_coeff,
    verify_chicken_and_egg,
    verify_diameter_bound,
    verify_recursive_bound,
)


def quad_ball_setting(T, dim=1, eval_every=None, x1=1.0, bound=1.0):
    problem = quadratic_problem(dim, feasible=Interval(-6, 6))
    factory = QuadraticOracleFactory(noise=BoundedUniformBall(bound))
    config = RunConfig(T=T, schedule=DEFAULT_SCHEDULE, x1=np.full(dim, x1),
                       eval_every=eval_every)
    return problem, factory, config


class TestEmpiricalQuantile:
    def test_nearest_rank_definition(self):
        gaps = list(range(1, 101))
        assert empirical_quantile(gaps, 0.1) == 90

    def test_delta_near_one_gives_minimum(self):
        gaps = list(range(1, 101))
        assert empirical_quantile(gaps, 0.999999) == 1

    def test_constant_sample(self):
        assert empirical_quantile([5.0, 5.0, 5.0], 0.37) == 5.0

    def test_validation(self):
        with pytest.raises(InputError):
            empirical_quantile([1.0], 0.0)
        with pytest.raises(InputError):
            empirical_quantile([], 0.5)


class TestTailFit:
    def _matrix(self, gaps_at_T, T=100):
        trials = len(gaps_at_T)
        gaps = np.asarray(gaps_at_T, dtype=float).reshape(trials, 1, 1)
        return TrialMatrix(gaps=gaps, checkpoints=[T], scheme_names=["nonuniform"],
                           meta={"T": T, "trials": trials})

    def test_all_zero_gaps(self):
        m = self._matrix([0.0] * 100)
        rep = tail_fit(m, "nonuniform", [0.1, 0.05])
        assert rep.constant == 0.0

    def test_exact_shape_recovery(self):
        T, trials, c = 50, 1000, 3.7
        deltas = [0.1, 0.05, 0.02]
        # constant blocks put the target value exactly at each delta's
        # nearest-rank position
        gaps = np.zeros(trials)
        for d in sorted(deltas, reverse=True):
            rank = math.ceil((1 - d) * trials)
            gaps[rank - 1:] = c * math.log(1 / d) / T
        m = self._matrix(gaps, T=T)
        rep = tail_fit(m, "nonuniform", deltas)
        for row in rep.rows:
            assert row.ratio == pytest.approx(c, rel=1e-12)
        assert rep.constant == pytest.approx(c, rel=1e-12)

    def test_unresolvable_delta_names_minimum(self):
        m = self._matrix([0.0] * 10)
        with pytest.raises(InputError) as err:
            tail_fit(m, "nonuniform", [0.05])
        assert "0.2" in str(err.value)

    def test_quantiles_non_increasing_in_delta(self):
        rng = np.random.default_rng(0)
        m = self._matrix(rng.exponential(size=500))
        rep = tail_fit(m, "nonuniform", [0.01, 0.1, 0.05, 0.2])
        qs = [r.quantile for r in rep.rows]  # rows sorted by ascending delta
        assert all(a >= b for a, b in zip(qs, qs[1:]))


class TestLbExactDistribution:
    def test_T8_pmf(self):
        pmf = dict(lb_exact_distribution_rational(8))
        assert pmf[Fraction(1, 8)] == Fraction(1, 2)
        assert pmf[Fraction(0)] == Fraction(1, 2)

    def test_T8_exceedance(self):
        pmf = lb_exact_distribution(8)
        p = sum(pr for v, pr in pmf if v >= 1 / 8)
        assert p == Fraction(1, 2)

    @pytest.mark.parametrize("T", [4, 8, 12, 32, 60])
    def test_probabilities_sum_to_one_exactly(self, T):
        total = sum(p for _, p in lb_exact_distribution_rational(T))
        assert total == Fraction(1)

    @pytest.mark.parametrize("T", [8, 16, 24])
    def test_support_matches_binomial_cross_check(self, T):
        # independent derivation: k = sum of m signs is 2*Binom(m,1/2) - m
        m = T // 4
        expected = {}
        for heads in range(m + 1):
            k = 2 * heads - m
            v = Fraction(1, 2) * Fraction(k, T // 2) ** 2
            expected[v] = expected.get(v, Fraction(0)) + Fraction(math.comb(m, heads), 2**m)
        assert dict(lb_exact_distribution_rational(T)) == expected
        support = {v for v, _ in lb_exact_distribution_rational(T)}
        alt = {Fraction(1, 2) * Fraction(k, T // 2) ** 2
               for k in range(-m, m + 1) if (k - m) % 2 == 0}
        assert support == alt

    def test_preconditions(self):
        with pytest.raises(InputError):
            lb_exact_distribution(10)
        with pytest.raises(InputError):
            lb_exact_distribution(64)


class TestLbSimulation:
    def test_small_simulation_matches(self):
        res = lb_simulate_and_match(8, trials=800, base_seed=123)
        assert res.kolmogorov_gap <= 0.05
        assert res.max_identity_error <= 1e-12

    def test_zero_noise_negative_control(self):
        # all mass at f = 0 sits Kolmogorov distance 1/2 from the exact pmf
        gap = kolmogorov_gap(np.zeros(1000), lb_exact_distribution(8))
        assert gap == pytest.approx(0.5)

    def test_report_equals_half_mean_of_signs(self):
        T = 16
        problem = lb_problem()
        config = lb_run_config(T)
        for seed in range(5):
            oracle = LowerBoundOracle(T, RngStream(77, seed))
            rec = run_sgd(problem, oracle, config, [make_averager("nonuniform")])
            zs = np.array([s.zhat[0] for _, s in rec.trajectory])
            window = zs[T // 2: 3 * T // 4]
            signs = np.sign(window)
            expected = 0.5 * signs.mean()
            assert rec.reported["nonuniform"][0] == pytest.approx(expected, abs=1e-12)

    def test_identity_error_requires_trajectory(self):
        from sgdavg.sgd import RunRecord

        with pytest.raises(InputError):
            iterate_identity_error(RunRecord({}, [], None))


class TestRunTrials:
    def test_single_trial_reduces_to_run_sgd(self):
        problem, factory, config = quad_ball_setting(T=50, eval_every=10)
        m = run_trials(problem, factory, config, ["final", "nonuniform"], 1, 42,
                       engine="sequential")
        rec = run_sgd(problem, factory(RngStream(42, 0)), config,
                      [make_averager("final"), make_averager("nonuniform")])
        for ci, (t, vals) in enumerate(rec.checkpoints):
            assert m.checkpoints[ci] == t
            assert m.gaps[0, ci, 0] == vals["final"] - problem.fstar
            assert m.gaps[0, ci, 1] == vals["nonuniform"] - problem.fstar

    def test_identical_seed_identical_matrix(self):
        problem, factory, config = quad_ball_setting(T=40)
        m1 = run_trials(problem, factory, config, ["nonuniform"], 5, 7)
        m2 = run_trials(problem, factory, config, ["nonuniform"], 5, 7)
        assert np.array_equal(m1.gaps, m2.gaps, equal_nan=True)

    def test_noiseless_trials_coincide(self):
        problem = quadratic_problem(1)
        factory = QuadraticOracleFactory(noise=NoNoise())
        config = RunConfig(T=30, schedule=DEFAULT_SCHEDULE, x1=np.array([1.0]))
        m = run_trials(problem, factory, config, ["nonuniform"], 8, 0)
        col = m.gaps[:, -1, 0]
        assert np.all(col == col[0])

    def test_order_and_parallelism_invariance(self):
        problem, factory, config = quad_ball_setting(T=60, eval_every=20)
        schemes = ["final", "uniform", "suffix", "nonuniform"]
        seq = run_trials(problem, factory, config, schemes, 6, 11, engine="sequential")
        par = run_trials(problem, factory, config, schemes, 6, 11, engine="sequential",
                         workers=2)
        bat = run_trials(problem, factory, config, schemes, 6, 11, engine="batched")
        assert np.array_equal(seq.gaps, par.gaps, equal_nan=True)
        assert np.array_equal(seq.gaps, bat.gaps, equal_nan=True)

    def test_batched_gaussian_ball_matches_sequential(self):
        from sgdavg.core import L2Ball
        from sgdavg.oracles import GaussianNoise

        problem = quadratic_problem(3, feasible=L2Ball(2.0, np.zeros(3)))
        factory = QuadraticOracleFactory(noise=GaussianNoise(1.0))
        config = RunConfig(T=150, schedule=DEFAULT_SCHEDULE,
                           x1=np.array([1.0, 0.5, -0.5]), eval_every=50)
        schemes = ["final", "uniform", "suffix", "nonuniform"]
        seq = run_trials(problem, factory, config, schemes, 6, 21, engine="sequential")
        bat = run_trials(problem, factory, config, schemes, 6, 21, engine="batched")
        assert np.nanmax(np.abs(seq.gaps - bat.gaps)) <= 1e-12

    def test_batched_svm_matches_sequential(self):
        ds = synthetic_separable_dataset(120, 8, seed=4)
        lam = 1.0 / ds.m
        problem = svm_problem(ds, lam)
        factory = SvmOracleFactory(ds, lam)
        config = RunConfig(T=240, schedule=DEFAULT_SCHEDULE, x1=np.zeros(8),
                           eval_every=120)
        schemes = ["final", "uniform", "suffix", "nonuniform"]
        seq = run_trials(problem, factory, config, schemes, 4, 3, engine="sequential")
        bat = run_trials(problem, factory, config, schemes, 4, 3, engine="batched")
        assert np.nanmax(np.abs(seq.gaps - bat.gaps)) <= 1e-12

    def test_svm_runs_through_process_pool(self):
        # problem/factory/config must survive pickling into worker processes
        ds = synthetic_separable_dataset(60, 4, seed=1)
        lam = 1.0 / ds.m
        problem = svm_problem(ds, lam)
        factory = SvmOracleFactory(ds, lam)
        config = RunConfig(T=60, schedule=DEFAULT_SCHEDULE, x1=np.zeros(4),
                           eval_every=30)
        one = run_trials(problem, factory, config, ["nonuniform"], 4, 13,
                         engine="sequential", workers=1)
        two = run_trials(problem, factory, config, ["nonuniform"], 4, 13,
                         engine="sequential", workers=2)
        assert np.array_equal(one.gaps, two.gaps, equal_nan=True)

    def test_batched_engine_unavailable_is_reported(self):
        problem, factory, config = quad_ball_setting(T=20)
        config = RunConfig(T=20, schedule=DEFAULT_SCHEDULE, x1=np.array([1.0]),
                           record_iterates=True)
        with pytest.raises(InputError, match="sequential"):
            run_trials(problem, factory, config, ["final"], 2, 0, engine="batched")

    def test_auto_engine_falls_back_for_recording(self):
        problem, factory, _ = quad_ball_setting(T=20)
        config = RunConfig(T=20, schedule=DEFAULT_SCHEDULE, x1=np.array([1.0]),
                           record_iterates=True)
        m = run_trials(problem, factory, config, ["final"], 2, 0, engine="auto")
        assert m.trials == 2

    def test_aborted_trial_names_index_and_seed(self):
        from sgdavg.experiments import TrialFailure
        from sgdavg.oracles import GradientSample

        class BadFactory:
            def __call__(self, stream):
                class BadOracle:
                    def query(self, x, t):
                        if stream.index == 2 and t == 3:
                            return GradientSample(np.array([np.nan]))
                        return GradientSample(x.copy())

                return BadOracle()

        problem = quadratic_problem(1)
        config = RunConfig(T=5, schedule=DEFAULT_SCHEDULE, x1=np.array([1.0]))
        with pytest.raises(TrialFailure) as err:
            run_trials(problem, BadFactory(), config, ["final"], 4, 99,
                       engine="sequential")
        msg = str(err.value)
        assert "trial 2" in msg and "99" in msg


class TestTelescopingProduct:
    def test_empty_product_is_one(self):
        assert telescoping_product_coeff(7, 7) == 1.0

    def test_direct_small_case(self):
        assert telescoping_product_coeff(3, 4) == pytest.approx(0.2, rel=1e-15)
        assert literal_telescoping_product(3, 4) == pytest.approx(0.2, rel=1e-12)

    def test_long_product_matches_literal(self):
        lit = literal_telescoping_product(3, 200)
        closed = telescoping_product_coeff(3, 200)
        assert closed == pytest.approx(lit, rel=1e-12)

    def test_sweep_passes(self):
        res = product_identity_sweep(max_t=120)
        assert res.passed
        assert res.value <= 1e-12

    def test_preconditions(self):
        with pytest.raises(InputError):
            telescoping_product_coeff(2, 5)
        with pytest.raises(InputError):
            telescoping_product_coeff(5, 4)


def bounded_quad_trajectory(T, seed, x1=6.0):
    problem = quadratic_problem(1, feasible=Interval(-6, 6))
    config = RunConfig(T=T, schedule=DEFAULT_SCHEDULE, x1=np.array([x1]),
                       record_iterates=True)
    oracle = QuadraticOracle(BoundedUniformBall(1.0), RngStream(seed))
    rec = run_sgd(problem, oracle, config, [make_averager("nonuniform")])
    return problem, rec.trajectory


class TestVerifiers:
    def test_diameter_on_bounded_run(self):
        problem, traj = bounded_quad_trajectory(10**4, seed=0)
        res = verify_diameter_bound(traj, problem.lipschitz, problem.mu, problem.xstar)
        assert res.passed
        assert res.value <= 0.5  # |x_t| <= 6 while the bound is 2L/mu = 12

    def test_diameter_pinned_at_optimum(self):
        problem = quadratic_problem(1)
        config = RunConfig(T=20, schedule=DEFAULT_SCHEDULE, x1=np.zeros(1),
                           record_iterates=True)
        rec = run_sgd(problem, QuadraticOracle(NoNoise(), RngStream(0)), config,
                      [make_averager("final")])
        res = verify_diameter_bound(rec.trajectory, 6.0, 1.0, problem.xstar)
        assert res.value == 0.0

    def test_recursive_bound_zero_noise_at_optimum(self):
        problem = quadratic_problem(1, feasible=Interval(-6, 6))
        config = RunConfig(T=50, schedule=DEFAULT_SCHEDULE, x1=np.zeros(1),
                           record_iterates=True)
        rec = run_sgd(problem, QuadraticOracle(NoNoise(), RngStream(0)), config,
                      [make_averager("final")])
        res = verify_recursive_bound(rec.trajectory, 1.0, problem.xstar)
        assert res.passed
        assert res.value == 0.0  # both sides vanish along the pinned run

    def test_recursive_bound_on_noisy_runs(self):
        for seed in range(3):
            problem, traj = bounded_quad_trajectory(500, seed=seed)
            res = verify_recursive_bound(traj, problem.mu, problem.xstar)
            assert res.passed

    def test_recursive_bound_on_adversarial_run(self):
        # default schedule with the adversarial oracle's noise: the bound is
        # distribution-free, so it must hold along this trajectory too
        T = 64
        problem = quadratic_problem(1, feasible=Interval(-6, 6))
        config = RunConfig(T=T, schedule=DEFAULT_SCHEDULE, x1=np.zeros(1),
                           record_iterates=True)
        oracle = LowerBoundOracle(T, RngStream(17))
        rec = run_sgd(problem, oracle, config, [make_averager("nonuniform")])
        res = verify_recursive_bound(rec.trajectory, 1.0, problem.xstar)
        assert res.passed

    def test_chicken_and_egg_pinned_at_optimum(self):
        problem = quadratic_problem(1, feasible=Interval(-6, 6))
        config = RunConfig(T=50, schedule=DEFAULT_SCHEDULE, x1=np.zeros(1),
                           record_iterates=True)
        rec = run_sgd(problem, QuadraticOracle(NoNoise(), RngStream(0)), config,
                      [make_averager("final")])
        res = verify_chicken_and_egg(rec.trajectory, 1.0, 6.0, problem.xstar)
        assert res.detail["v_total"] == 0.0
        assert res.value == pytest.approx(res.detail["beta"])
        assert res.value > 0

    def test_chicken_and_egg_on_noisy_runs(self):
        for seed in range(3):
            problem, traj = bounded_quad_trajectory(500, seed=seed)
            res = verify_chicken_and_egg(traj, problem.mu, problem.lipschitz,
                                         problem.xstar)
            assert res.passed

    def test_chicken_and_egg_requires_bounded_noise(self):
        T = 64
        problem = quadratic_problem(1, feasible=Interval(-6, 6))
        config = RunConfig(T=T, schedule=DEFAULT_SCHEDULE, x1=np.zeros(1),
                           record_iterates=True)
        oracle = LowerBoundOracle(T, RngStream(0))
        rec = run_sgd(problem, oracle, config, [make_averager("final")])
        with pytest.raises(InputError):
            verify_chicken_and_egg(rec.trajectory, 1.0, 6.0, problem.xstar)

    def test_coefficients_match_literal_double_sums(self):
        # brute-force O(T^2) evaluation of the constructive weights
        T, mu, L = 50, 1.3, 6.0
        alpha, beta = chicken_and_egg_coefficients(T, mu, L)

        def a(i, t):
            return telescoping_product_coeff(i, t) / (i + 1)

        def b(i, t):
            return telescoping_product_coeff(i, t) / (i + 1) ** 2

        for i in range(3, T):
            ref = (4.0 / mu) * sum(t * t * a(i, t - 1) / i for t in range(i + 1, T + 1))
            assert alpha[i] == pytest.approx(ref, rel=1e-12)
        assert alpha[1] == alpha[2] == alpha[T] == 0.0
        ref_beta = (4.0 * (L + 1) ** 2 / mu**2) * sum(
            t * t * sum(b(i, t - 1) for i in range(3, t)) for t in range(4, T + 1)
        ) + 56.0 * L * L / mu**2
        assert beta == pytest.approx(ref_beta, rel=1e-12)

    def test_recursive_bound_matches_literal_double_sum(self):
        # the prefix-sum RHS must agree with direct evaluation at every t
        problem, traj = bounded_quad_trajectory(30, seed=7)
        mu, xstar = problem.mu, problem.xstar
        X = np.stack([x for x, _ in traj])
        Z = np.stack([s.zhat for _, s in traj])
        G = np.stack([s.ghat for _, s in traj])
        D = X - xstar
        u = np.einsum("ij,ij->i", Z, D)
        h = np.einsum("ij,ij->i", G, G)
        dist2 = np.einsum("ij,ij->i", D, D)
        res = verify_recursive_bound(traj, mu, xstar)
        worst = math.inf
        for t in range(4, 30):
            rhs = (4 / mu) * sum(
                telescoping_product_coeff(i, t) / (i + 1) * u[i - 1]
                for i in range(3, t + 1)
            ) + (4 / mu**2) * sum(
                telescoping_product_coeff(i, t) / (i + 1) ** 2 * h[i - 1]
                for i in range(3, t + 1)
            )
            worst = min(worst, rhs - dist2[t])
        assert res.value == pytest.approx(worst, rel=1e-9, abs=1e-15)

    def test_alpha_magnitude_constant(self):
        # max_i alpha_i stays within a small multiple of T/mu
        for T in (100, 500, 2000):
            alpha, _ = chicken_and_egg_coefficients(T, 1.0, 6.0)
            ratio = alpha.max() / T
            assert ratio <= 16.0

    def test_beta_zero_hook_fails(self):
        problem, traj = bounded_quad_trajectory(200, seed=1)
        res = verify_chicken_and_egg(traj, problem.mu, problem.lipschitz,
                                     problem.xstar, beta_scale=0.0)
        assert not res.passed

    def test_missing_optimum_rejected(self):
        problem, traj = bounded_quad_trajectory(50, seed=0)
        with pytest.raises(InputError):
            verify_diameter_bound(traj, 6.0, 1.0, None)

    def test_missing_decomposition_rejected(self):
        from sgdavg.oracles import GradientSample

        traj = [(np.zeros(1), GradientSample(np.zeros(1)))] * 10
        with pytest.raises(InputError):
            verify_recursive_bound(traj, 1.0, np.zeros(1))

    def test_fleet_smoke(self):
        results = run_verification_fleet(runs=2, T=200, base_seed=1,
                                         mgf_samples=2 * 10**4, product_max_t=40)
        assert all(r.passed for r in results)
        names = {r.name for r in results}
        assert {"diameter-bound", "recursive-bound", "chicken-and-egg",
                "product-identity", "mgf-gaussian-n1", "mgf-gaussian-n50"} <= names


class TestCsvRoundTrip:
    def _small_matrix(self):
        gaps = np.arange(4, dtype=float).reshape(1, 2, 2)
        return TrialMatrix(gaps=gaps, checkpoints=[10, 20],
                           scheme_names=["final", "nonuniform"],
                           meta={"T": 20, "schemes": ["final", "nonuniform"]})

    def test_row_count(self, tmp_path):
        path = tmp_path / "m.csv"
        export_csv(self._small_matrix(), path)
        lines = path.read_text().splitlines()
        data = [ln for ln in lines if not ln.startswith("#")]
        assert data[0] == "trial,checkpoint_iter,scheme,objective"
        assert len(data) - 1 == 4

    def test_round_trip_exact(self, tmp_path):
        problem, factory, config = quad_ball_setting(T=30, eval_every=10)
        m = run_trials(problem, factory, config,
                       ["final", "uniform", "suffix", "nonuniform"], 3, 5)
        path = tmp_path / "m.csv"
        export_csv(m, path)
        back = import_csv(path)
        assert np.array_equal(m.gaps, back.gaps, equal_nan=True)
        assert back.checkpoints == m.checkpoints
        assert back.scheme_names == m.scheme_names
        assert back.meta == m.meta

    def test_comments_skipped(self, tmp_path):
        path = tmp_path / "m.csv"
        export_csv(self._small_matrix(), path, comments=["config: x=1"])
        text = path.read_text()
        assert text.startswith("# config: x=1\n")
        import_csv(path)  # does not choke on the comments


class TestSvg:
    def test_constant_gaps_draw_horizontal_mean(self, tmp_path):
        gaps = np.full((3, 4, 1), 2.5)
        m = TrialMatrix(gaps=gaps, checkpoints=[1, 2, 3, 4],
                        scheme_names=["nonuniform"], meta={})
        path = tmp_path / "p.svg"
        render_svg(m, path)
        text = path.read_text()
        assert "<svg" in text and "</svg>" in text
        mean_line = [ln for ln in text.splitlines() if "dasharray" in ln][0]
        pts = mean_line.split('points="')[1].split('"')[0].split()
        ys = {p.split(",")[1] for p in pts}
        assert len(ys) == 1  # constant objective renders flat

    def test_translucent_per_trial_lines(self, tmp_path):
        problem, factory, config = quad_ball_setting(T=30, eval_every=10)
        m = run_trials(problem, factory, config, ["final", "nonuniform"], 5, 5)
        path = tmp_path / "p.svg"
        render_svg(m, path, schemes=["nonuniform"])
        text = path.read_text()
        assert text.count("stroke-opacity") == 5
