"""Solver correctness: closed forms, update rules, monotonicity, dispatch."""
import numpy as np
import pytest

from besi.exceptions import (
    ConfigError,
    DegenerateDataError,
    UnsupportedModelError,
)
from besi.model import LeadField, NoiseModel
from besi.solvers import (
    RootSolver,
    SolverConfig,
    _em_variances,
    _ridge_solve_variance,
    _solve_gamma_generic,
    gamma_update_cg,
    solve,
    solve_em_cg,
    solve_ias_cg,
    solve_mm_lqa,
    solve_wcgl,
    solve_wcl,
    solve_wmne,
)
from besi.weighting import Optimizer, PriorFamily, PriorSpec, SnrContext

TIGHT = SolverConfig(
    max_outer_iters=500,
    max_inner_iters=2000,
    outer_tol=1e-12,
    inner_tol=1e-12,
    lqa_epsilon=1e-9,
)


def _instance(m=6, n=5, d=2, seed=0, sigma=0.5):
    rng = np.random.default_rng(seed)
    lf = LeadField(entries=rng.standard_normal((m, n * d)), n=n, d=d)
    noise = NoiseModel(mean=np.zeros(m), covariance=sigma**2 * np.eye(m))
    y = rng.standard_normal(m)
    return lf, y, noise


def _identity_problem(values, sigma=1.0):
    y = np.asarray(values, dtype=float)
    m = y.size
    lf = LeadField(entries=np.eye(m), n=m, d=1)
    noise = NoiseModel(mean=np.zeros(m), covariance=sigma**2 * np.eye(m))
    return lf, y, noise


class TestWmne:
    def test_scalar_shrinkage_factor(self):
        # L = I, Gamma = sigma^2 I, w = 1/(2 gamma)  =>  x = gamma/(gamma+sigma^2) y
        gamma, sigma2 = 3.0, 2.0
        lf, y, noise = _identity_problem([1.0, -2.0, 0.5], sigma=np.sqrt(sigma2))
        est = solve_wmne(lf, y, noise, np.full(3, 1.0 / (2.0 * gamma)))
        np.testing.assert_allclose(
            est.coefficients, gamma / (gamma + sigma2) * y, rtol=1e-12
        )

    def test_zero_data_gives_zero(self):
        lf, _, noise = _instance()
        est = solve_wmne(lf, np.zeros(lf.m), noise, np.ones(lf.n))
        np.testing.assert_array_equal(est.coefficients, 0.0)

    def test_norm_decreases_monotonically_in_weight(self):
        lf, y, noise = _instance(seed=3)
        norms = [
            np.linalg.norm(solve_wmne(lf, y, noise, np.full(lf.n, w)).coefficients)
            for w in (0.1, 1.0, 10.0, 100.0, 1e4)
        ]
        assert all(a > b for a, b in zip(norms, norms[1:]))

    def test_satisfies_normal_equations(self):
        lf, y, noise = _instance(m=7, n=4, d=2, seed=5)
        rng = np.random.default_rng(6)
        w = rng.uniform(0.2, 3.0, lf.n)
        est = solve_wmne(lf, y, noise, w)
        gi = np.linalg.inv(noise.covariance)
        lhs = (lf.entries.T @ gi @ lf.entries + 2.0 * np.diag(np.repeat(w, lf.d))) @ est.coefficients
        rhs = lf.entries.T @ gi @ y
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_primal_and_dual_paths_agree(self):
        # m > dn exercises the primal branch, m < dn the dual one
        rng = np.random.default_rng(8)
        w = rng.uniform(0.5, 2.0, 3)
        tall, y_t, noise_t = _instance(m=9, n=3, d=1, seed=9)
        wide, y_w, noise_w = _instance(m=4, n=3, d=2, seed=10)
        for lf, y, noise in ((tall, y_t, noise_t), (wide, y_w, noise_w)):
            est = solve_wmne(lf, y, noise, w)
            gi = np.linalg.inv(noise.covariance)
            a = lf.entries.T @ gi @ lf.entries + 2.0 * np.diag(np.repeat(w, lf.d))
            dense = np.linalg.solve(a, lf.entries.T @ gi @ y)
            np.testing.assert_allclose(est.coefficients, dense, rtol=1e-9, atol=1e-12)

    def test_rejects_bad_weights(self):
        lf, y, noise = _instance()
        with pytest.raises(ValueError):
            solve_wmne(lf, y, noise, np.ones(lf.n + 1))
        with pytest.raises(ValueError):
            solve_wmne(lf, y, noise, np.zeros(lf.n))


class TestMmLqa:
    def test_zero_data_converges_immediately(self):
        lf, _, noise = _instance()
        est, trace = solve_mm_lqa(lf, np.zeros(lf.m), noise, np.ones(lf.n), p=1)
        np.testing.assert_array_equal(est.coefficients, 0.0)
        assert trace.status == "converged"

    def test_matches_soft_threshold(self):
        # min 0.5 (y - x)^2 + w |x| has the soft-threshold solution y - w
        lf, y, noise = _identity_problem([3.0])
        est, trace = solve_mm_lqa(lf, y, noise, np.array([1.0]), p=1, config=TIGHT)
        assert est.coefficients[0] == pytest.approx(2.0, abs=1e-4)
        assert trace.status == "converged"

    def test_matches_block_soft_threshold(self):
        # single block, L = I: x = (1 - w/||y||)_+ y
        y = np.array([3.0, 4.0])
        lf = LeadField(entries=np.eye(2), n=1, d=2)
        noise = NoiseModel(mean=np.zeros(2), covariance=np.eye(2))
        est, _ = solve_mm_lqa(lf, y, noise, np.array([2.0]), p=2, config=TIGHT)
        np.testing.assert_allclose(est.coefficients, 0.6 * y, atol=1e-4)

    def test_smoothed_objective_never_increases(self):
        for seed in range(5):
            lf, y, noise = _instance(m=6, n=8, d=1, seed=seed)
            for p in (1, 2):
                _, trace = solve_mm_lqa(lf, y, noise, np.full(lf.n, 0.7), p=p)
                diffs = np.diff(trace.objectives)
                assert np.all(diffs <= 1e-10 * max(1.0, abs(trace.objectives[0])))

    def test_solution_scales_linearly_with_data_and_weights(self):
        # scaling (y, w) by c scales the p=1 minimizer by c
        lf, y, noise = _instance(m=5, n=8, d=1, seed=11)
        w = np.full(lf.n, 0.4)
        c = 7.0
        base, _ = solve_mm_lqa(lf, y, noise, w, p=1, config=TIGHT)
        scaled, _ = solve_mm_lqa(lf, c * y, noise, c * w, p=1, config=TIGHT)
        np.testing.assert_allclose(scaled.coefficients, c * base.coefficients, atol=1e-6)

    def test_matches_coordinate_descent_lasso(self):
        lf, y, noise = _instance(m=6, n=9, d=1, seed=12, sigma=1.0)
        w = np.full(lf.n, 0.8)
        est, trace = solve_mm_lqa(lf, y, noise, w, p=1, config=TIGHT)

        def objective(x):
            r = y - lf.entries @ x
            return 0.5 * float(r @ r) + float(np.sum(w * np.abs(x)))

        x = np.zeros(lf.n)
        col_sq = (lf.entries**2).sum(axis=0)
        for _ in range(4000):
            for i in range(lf.n):
                rho = lf.entries[:, i] @ (y - lf.entries @ x) + col_sq[i] * x[i]
                x[i] = np.sign(rho) * max(abs(rho) - w[i], 0.0) / col_sq[i]
        assert objective(est.coefficients) == pytest.approx(objective(x), rel=1e-6)

    def test_rejects_bad_p(self):
        lf, y, noise = _instance()
        with pytest.raises(ConfigError):
            solve_mm_lqa(lf, y, noise, np.ones(lf.n), p=3)


def _gamma_objective(gamma, xb2, alpha, beta, s, d):
    c = s * alpha - (d + 2.0) / 2.0
    return xb2 / (2.0 * gamma) + (gamma / beta) ** s - c * np.log(gamma)


class TestGammaUpdate:
    def test_gamma_case_at_zero_block(self):
        # s=1, d=3, alpha=4, beta=2: gamma = beta (alpha - (d+2)/2) = 3
        np.testing.assert_allclose(
            gamma_update_cg(np.array([0.0]), 4.0, np.array([2.0]), 1.0, 3), [3.0]
        )

    def test_inverse_gamma_case_at_zero_block(self):
        # the stationarity equation x^2/2 + beta - (alpha + (d+2)/2) gamma = 0
        # gives gamma = beta/(alpha + (d+2)/2); the sign printed in the
        # source formula ("alpha - (d+2)/2") contradicts its own generic
        # equation and is corrected here: 2/(4 + 2.5) = 4/13
        got = gamma_update_cg(np.array([0.0]), 4.0, np.array([2.0]), -1.0, 3)
        np.testing.assert_allclose(got, [4.0 / 13.0])

    def test_closed_forms_are_stationary_points(self):
        rng = np.random.default_rng(20)
        for s in (1.0, -1.0):
            for _ in range(50):
                xb2 = rng.uniform(0.01, 10.0)
                alpha = rng.uniform(0.6, 5.0)
                beta = rng.uniform(0.1, 4.0)
                d = int(rng.integers(1, 4))
                g = gamma_update_cg(np.array([xb2]), alpha, np.array([beta]), s, d)[0]
                f0 = _gamma_objective(g, xb2, alpha, beta, s, d)
                for bump in (1e-4, -1e-4):
                    assert f0 <= _gamma_objective(g * (1 + bump), xb2, alpha, beta, s, d) + 1e-12

    def test_generic_root_reproduces_closed_forms(self):
        rng = np.random.default_rng(21)
        for root in (RootSolver.NEWTON, RootSolver.BISECTION):
            cfg = SolverConfig(root_solver=root)
            for _ in range(50):
                xb2 = rng.uniform(0.0, 8.0)
                alpha = rng.uniform(0.6, 5.0)
                beta = rng.uniform(0.1, 4.0)
                d = int(rng.integers(1, 4))
                for s in (1.0, -1.0):
                    closed = gamma_update_cg(np.array([xb2]), alpha, np.array([beta]), s, d)[0]
                    generic = _solve_gamma_generic(xb2, alpha, beta, s, d, cfg)
                    if closed == 0.0:
                        assert generic == 0.0
                    else:
                        assert generic == pytest.approx(closed, rel=1e-8)

    def test_generic_root_zero_block_edge(self):
        cfg = SolverConfig()
        # s=1 with positive c: hyperprior mode beta * c
        assert _solve_gamma_generic(0.0, 4.0, 2.0, 1.0, 3, cfg) == pytest.approx(3.0)
        # s=1 with negative c: boundary collapse to zero
        assert _solve_gamma_generic(0.0, 1.0, 2.0, 1.0, 3, cfg) == 0.0
        # s=-1: the mode is always interior
        assert _solve_gamma_generic(0.0, 4.0, 2.0, -1.0, 3, cfg) == pytest.approx(4.0 / 13.0)

    def test_generic_s_stationarity(self):
        rng = np.random.default_rng(22)
        for s in (0.5, 2.0, 3.0):
            for _ in range(20):
                xb2 = rng.uniform(0.01, 5.0)
                alpha = rng.uniform(1.1, 4.0)
                beta = rng.uniform(0.2, 3.0)
                g = gamma_update_cg(np.array([xb2]), alpha, np.array([beta]), s, 1)[0]
                f0 = _gamma_objective(g, xb2, alpha, beta, s, 1)
                for bump in (1e-4, -1e-4):
                    assert f0 <= _gamma_objective(g * (1 + bump), xb2, alpha, beta, s, 1) + 1e-12

    def test_validation(self):
        with pytest.raises(ConfigError):
            gamma_update_cg(np.array([1.0]), 2.0, np.array([0.0]), 1.0, 1)
        with pytest.raises(ConfigError):
            gamma_update_cg(np.array([1.0]), 2.0, np.array([1.0]), 0.0, 1)


class TestIas:
    def test_objective_never_increases(self):
        for seed in range(20):
            lf, y, noise = _instance(m=6, n=5, d=2, seed=seed)
            s = 1.0 if seed % 2 == 0 else -1.0
            alpha = 2.0 if s == 1.0 else 3.0
            _, _, trace = solve_ias_cg(lf, y, noise, alpha, np.full(lf.n, 0.5), s)
            diffs = np.diff(trace.objectives)
            assert np.all(diffs <= 1e-9 * max(1.0, abs(trace.objectives[0])))

    def test_bitwise_deterministic(self):
        lf, y, noise = _instance(seed=30)
        a, _, _ = solve_ias_cg(lf, y, noise, 2.0, np.full(lf.n, 0.3), 1.0)
        b, _, _ = solve_ias_cg(lf, y, noise, 2.0, np.full(lf.n, 0.3), 1.0)
        assert np.array_equal(a.coefficients, b.coefficients)

    def test_fixed_point_consistency(self):
        lf, y, noise = _instance(seed=31)
        est, gamma, trace = solve_ias_cg(
            lf, y, noise, 2.5, np.full(lf.n, 0.4), 1.0, config=TIGHT
        )
        assert trace.status == "converged"
        # one more alternation from the returned state must not move x
        est2, _, _ = solve_ias_cg(
            lf, y, noise, 2.5, np.full(lf.n, 0.4), 1.0,
            config=SolverConfig(max_outer_iters=1), gamma0=gamma,
        )
        assert np.linalg.norm(est2.coefficients - est.coefficients) <= 1e-8 * (
            1.0 + np.linalg.norm(est.coefficients)
        )

    def test_gamma_trace_recorded(self):
        lf, y, noise = _instance(seed=32)
        _, gamma, trace = solve_ias_cg(lf, y, noise, 2.0, np.full(lf.n, 0.3), -1.0)
        assert trace.gamma_final is not None
        np.testing.assert_array_equal(trace.gamma_final, gamma)
        assert len(trace.gamma_summary) == trace.iterations

    def test_rejects_bad_gamma0(self):
        lf, y, noise = _instance()
        with pytest.raises(ConfigError):
            solve_ias_cg(
                lf, y, noise, 2.0, np.full(lf.n, 0.3), 1.0,
                gamma0=np.full(lf.n, -1.0),
            )

    def test_rejects_wrong_data_length(self):
        lf, y, noise = _instance()
        with pytest.raises(ValueError):
            solve_ias_cg(lf, y[:-1], NoiseModel(np.zeros(5), np.eye(5)), 2.0,
                         np.full(lf.n, 0.3), 1.0)


class TestEm:
    def test_inverse_gamma_precision_example(self):
        # ||x||^2 = 1, alpha = 2, beta = 1, d = 2: w = (2 + 1)/(1 + 1) = 3/2,
        # stored as the variance 1/w = 2/3
        out = _em_variances(np.array([1.0]), 2.0, np.array([1.0]), -1.0, 2, 0.0)
        np.testing.assert_allclose(out, [2.0 / 3.0])

    def test_gamma_large_argument_limit(self):
        # ratio K_nu/K_{nu-1} -> 1, so the variance approaches sqrt(2 beta)||x||
        beta = 2.0
        xb = 50.0 / np.sqrt(2.0 / beta)
        out = _em_variances(np.array([xb]), 1.0, np.array([beta]), 1.0, 1, 0.0)[0]
        assert out == pytest.approx(np.sqrt(2.0 * beta) * xb, rel=1e-3)
        out = _em_variances(np.array([xb]), 2.5, np.array([beta]), 1.0, 1, 0.0)[0]
        assert out == pytest.approx(np.sqrt(2.0 * beta) * xb, rel=0.05)

    def test_gamma_zero_block_limit(self):
        # z -> 0 with nu = alpha - d/2 > 1 tends to 2 beta (nu - 1)
        out = _em_variances(np.array([0.0]), 3.0, np.array([1.5]), 1.0, 1, 0.0)[0]
        assert out == pytest.approx(2.0 * 1.5 * 1.5, rel=1e-6)

    def test_zero_data_stays_zero(self):
        lf, _, noise = _instance(seed=40)
        est, trace = solve_em_cg(lf, np.zeros(lf.m), noise, 1.0, np.full(lf.n, 0.5), 1.0)
        np.testing.assert_array_equal(est.coefficients, 0.0)
        assert trace.status == "converged"

    def test_fixed_point_consistency(self):
        lf, y, noise = _instance(seed=41)
        cfg = SolverConfig(max_outer_iters=5000, outer_tol=1e-13)
        for s, alpha in ((1.0, 1.0), (-1.0, 2.0)):
            est, trace = solve_em_cg(lf, y, noise, alpha, np.full(lf.n, 0.6), s, config=cfg)
            assert trace.status == "converged"
            lw = noise.whiten_array(lf.entries)
            yw = noise.whiten_array(y - noise.mean)
            xb = est.block_amplitudes()
            var = _em_variances(xb, alpha, np.full(lf.n, 0.6), s, lf.d, cfg.bessel_delta)
            x_next = _ridge_solve_variance(lw, yw, np.repeat(var, lf.d))
            assert np.linalg.norm(x_next - est.coefficients) <= 1e-8 * (
                1.0 + np.linalg.norm(est.coefficients)
            )

    def test_marginal_objective_never_increases(self):
        for seed in range(10):
            lf, y, noise = _instance(m=6, n=5, d=2, seed=seed)
            s = 1.0 if seed % 2 == 0 else -1.0
            alpha = 1.5 if s == 1.0 else 2.5
            _, trace = solve_em_cg(lf, y, noise, alpha, np.full(lf.n, 0.7), s)
            diffs = np.diff(trace.objectives)
            assert np.all(diffs <= 1e-8 * max(1.0, abs(trace.objectives[0])))

    def test_rejects_unsupported_s(self):
        lf, y, noise = _instance()
        with pytest.raises(UnsupportedModelError):
            solve_em_cg(lf, y, noise, 2.0, np.full(lf.n, 0.5), 0.5)


class TestConditionalLaplace:
    def test_gamma_update_wiring(self):
        # after the final iteration gamma = numer/(beta + ||x_k||) exactly
        lf, y, noise = _instance(m=6, n=4, d=2, seed=50)
        beta = np.full(lf.n, 0.8)
        for fn, p in ((solve_wcl, 1), (solve_wcgl, 2)):
            for variant, shift in ((Optimizer.IAS, 0.0), (Optimizer.EM, 1.0)):
                est, gamma, _ = fn(lf, y, noise, 2.5, beta, variant=variant)
                blocks = est.coefficients.reshape(lf.n, lf.d)
                xb = np.abs(blocks).sum(axis=1) if p == 1 else np.linalg.norm(blocks, axis=1)
                if p == 1:
                    numer = 2.5 + shift
                else:
                    numer = 2.5 + (lf.d - 1.0 if variant is Optimizer.IAS else lf.d)
                np.testing.assert_allclose(gamma, numer / (beta + xb), rtol=1e-13)

    def test_d1_group_reduces_to_scalar(self):
        lf, y, noise = _instance(m=6, n=8, d=1, seed=51)
        beta = np.full(lf.n, 1.2)
        for variant in (Optimizer.IAS, Optimizer.EM):
            a, ga, _ = solve_wcl(lf, y, noise, 3.0, beta, variant=variant, config=TIGHT)
            b, gb, _ = solve_wcgl(lf, y, noise, 3.0, beta, variant=variant, config=TIGHT)
            np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-7)
            np.testing.assert_allclose(ga, gb, rtol=1e-6)

    def test_zero_data_is_degenerate(self):
        lf, _, noise = _instance(seed=52)
        with pytest.raises(DegenerateDataError):
            solve_wcl(lf, np.zeros(lf.m), noise, 2.5, np.full(lf.n, 1.0))
        with pytest.raises(DegenerateDataError):
            solve_wcgl(lf, np.zeros(lf.m), noise, 2.5, np.full(lf.n, 1.0))

    def test_rescale_rescues_weak_data(self):
        # scale the data so every initial correlation ratio sits below one;
        # the safeguard must still produce a nonzero first iterate
        rng = np.random.default_rng(53)
        for seed in range(10):
            lf, y, noise = _instance(m=6, n=5, d=2, seed=60 + seed)
            y = y * 1e-6
            for fn in (solve_wcl, solve_wcgl):
                est, _, _ = fn(
                    lf, y, noise, 2.5, np.full(lf.n, rng.uniform(0.5, 2.0)),
                    variant=Optimizer.IAS, config=SolverConfig(max_outer_iters=1),
                )
                assert np.linalg.norm(est.coefficients) > 0.0

    def test_objective_never_increases(self):
        for seed in range(10):
            lf, y, noise = _instance(m=6, n=5, d=2, seed=70 + seed)
            fn = solve_wcl if seed % 2 == 0 else solve_wcgl
            variant = Optimizer.IAS if seed % 3 == 0 else Optimizer.EM
            _, _, trace = fn(lf, y, noise, 2.5, np.full(lf.n, 0.9), variant=variant)
            diffs = np.diff(trace.objectives)
            assert np.all(diffs <= 1e-7 * max(1.0, abs(trace.objectives[0])))

    def test_validation(self):
        lf, y, noise = _instance()
        with pytest.raises(ConfigError):
            solve_wcl(lf, y, noise, -1.0, np.full(lf.n, 1.0))
        with pytest.raises(ConfigError):
            solve_wcl(lf, y, noise, 2.5, np.full(lf.n, -1.0))
        with pytest.raises(ConfigError):
            solve_wcgl(lf, y, noise, 2.5, np.full(lf.n, 1.0), variant=Optimizer.CLOSED_FORM)


class TestDispatcher:
    def _ctx(self, lf, noise):
        return SnrContext.from_lead_field(lf, noise, snr=5.0)

    def test_wg_routes_to_wmne(self):
        lf, y, noise = _instance(seed=80)
        spec = PriorSpec.from_snr(PriorFamily.WG, self._ctx(lf, noise), lf.d)
        est, trace = solve(spec, lf, y, noise)
        direct = solve_wmne(lf, y, noise, spec.weights)
        np.testing.assert_array_equal(est.coefficients, direct.coefficients)
        assert trace.solver_id == "wmne"
        assert trace.status == "converged"

    def test_wl_and_wgl_route_to_mm_lqa(self):
        lf, y, noise = _instance(seed=81)
        for fam, sid in ((PriorFamily.WL, "wl"), (PriorFamily.WGL, "wgl")):
            spec = PriorSpec.from_snr(fam, self._ctx(lf, noise), lf.d)
            est, trace = solve(spec, lf, y, noise)
            direct, _ = solve_mm_lqa(
                lf, y, noise, spec.weights, 1 if fam is PriorFamily.WL else 2, lf.d
            )
            np.testing.assert_array_equal(est.coefficients, direct.coefficients)
            assert trace.solver_id == sid

    def test_conditional_routes(self):
        lf, y, noise = _instance(seed=82)
        ctx = self._ctx(lf, noise)
        spec = PriorSpec.from_snr(PriorFamily.WCG_GA, ctx, lf.d, optimizer=Optimizer.IAS)
        est, trace = solve(spec, lf, y, noise)
        direct, _, _ = solve_ias_cg(lf, y, noise, spec.alpha_bar, spec.beta, 1.0, lf.d)
        np.testing.assert_array_equal(est.coefficients, direct.coefficients)
        assert trace.solver_id == "cg-ga-ias"

        spec = PriorSpec.from_snr(PriorFamily.WCGL, ctx, lf.d, optimizer=Optimizer.EM)
        est, trace = solve(spec, lf, y, noise)
        direct, _, _ = solve_wcgl(
            lf, y, noise, spec.alpha_bar, spec.beta, lf.d, variant=Optimizer.EM
        )
        np.testing.assert_array_equal(est.coefficients, direct.coefficients)
        assert trace.solver_id == "wcgl-em"

    def test_solve_is_deterministic(self):
        lf, y, noise = _instance(seed=83)
        spec = PriorSpec.from_snr(
            PriorFamily.WCG_IG, self._ctx(lf, noise), lf.d, optimizer=Optimizer.EM
        )
        a, _ = solve(spec, lf, y, noise)
        b, _ = solve(spec, lf, y, noise)
        assert np.array_equal(a.coefficients, b.coefficients)


class TestSolverConfig:
    def test_defaults_are_valid(self):
        cfg = SolverConfig()
        assert cfg.max_outer_iters == 200
        assert cfg.root_solver is RootSolver.NEWTON

    def test_string_root_solver_coerced(self):
        assert SolverConfig(root_solver="bisection").root_solver is RootSolver.BISECTION

    def test_rejects_bad_values(self):
        with pytest.raises(ConfigError):
            SolverConfig(max_outer_iters=0)
        with pytest.raises(ConfigError):
            SolverConfig(outer_tol=0.0)
        with pytest.raises(ConfigError):
            SolverConfig(bessel_delta=-1e-3)
        with pytest.raises(ConfigError):
            SolverConfig(rescale_mu=1.0)
