import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import sim2_params
from oracles import interpolated_quantile, ratio_noise_estimate
from gflsr import inference
from gflsr.core import Dataset, NumericalError
from gflsr.fit import FitConfig, fit_pls, predict
from gflsr.inference import (BootstrapResult, align_signs, align_to, bootstrap_dataset,
                             corrected_b, corrected_estimates, corrected_noise, intervals,
                             mean_interval, percentile_interval, predict_interval, refit,
                             residual_bootstrap)
from gflsr.simulate import (SIM3_B, NoiseSpec, noise_rate_spec, random_params, sim3_params,
                            simulate_pls)


def _zero_noise_fit(H=2, n=200):
    P = random_params(6, 5, H, 3)
    data, gt = simulate_pls(P, n, NoiseSpec("A", orthogonal_scores=True), 4)
    return P, fit_pls(data, FitConfig(H)), gt


class TestCorrectedNoise:
    def test_zero_noise(self):
        _, fit, gt = _zero_noise_fit()
        ce = corrected_estimates(fit)
        assert abs(ce.sigma_x_sq_corr) < 1e-6
        np.testing.assert_allclose(ce.sigma_xi_sq_corr, gt.xi.var(axis=0), atol=1e-6)
        assert ce.flags == () or all("clamped" in f for f in ce.flags)

    def test_toy_against_loop_oracle(self):
        # p = 2, W = e1, known sigma_x^2
        r = np.random.default_rng(0)
        n, sx = 4000, 0.3
        xi = 2.0 * r.standard_normal(n)
        X = np.outer(xi, [1.0, 0.0]) + np.sqrt(sx) * r.standard_normal((n, 2))
        Y = (1.5 * xi + 0.1 * r.standard_normal(n))[:, None]
        fit = fit_pls(Dataset.from_raw(X, Y), FitConfig(1))
        U = fit.U_hat
        resid = fit.X0 @ (np.eye(2) - U @ U.T)
        est = corrected_noise(resid.T @ resid / n, U, "B")
        assert est == pytest.approx(ratio_noise_estimate(resid, U), abs=1e-10)
        # ratio formula recovers the noise level up to Monte Carlo error
        assert est == pytest.approx(sx, abs=3 * sx * np.sqrt(2 / n) * 2)

    def test_case_c_isotropic_input(self):
        U = np.linalg.qr(np.random.default_rng(1).normal(size=(6, 2)))[0]
        P = np.eye(6) - U @ U.T
        S = corrected_noise(0.7 * P @ P.T, U, "C")
        np.testing.assert_allclose(S, 0.7 * np.eye(6), atol=1e-8)
        assert corrected_noise(0.7 * P @ P.T, U, "B") == pytest.approx(0.7, abs=1e-12)

    def test_case_c_literal_has_empty_block(self):
        U = np.linalg.qr(np.random.default_rng(1).normal(size=(6, 2)))[0]
        P = np.eye(6) - U @ U.T
        S = corrected_noise(0.7 * P @ P.T, U, "C", fill_null=False)
        np.testing.assert_allclose(U.T @ S @ U, 0, atol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_case_c_matches_case_b(self, seed):
        P = random_params(6, 5, 2, seed % 1000)
        data, _ = simulate_pls(P, 80, NoiseSpec("B", 0.3, 0.2, sigma1_sq=0.1), seed)
        fit = fit_pls(data, FitConfig(2))
        b, c = corrected_estimates(fit, "B"), corrected_estimates(fit, "C")
        np.testing.assert_allclose(np.diag(c.sigma_x_sq_corr).mean(), b.sigma_x_sq_corr, rtol=1e-8)
        np.testing.assert_allclose(c.sigma_xi_sq_corr, b.sigma_xi_sq_corr, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(c.b_corr, b.b_corr, rtol=1e-8)

    def test_bad_assumption(self):
        with pytest.raises(ValueError):
            corrected_noise(np.eye(2), np.eye(2)[:, :1], "D")


class TestCorrectedB:
    def test_zero_leakage_is_ols(self):
        r = np.random.default_rng(2)
        xi, om = r.normal(size=50), r.normal(size=50)
        assert corrected_b(xi, om, 0.0) == pytest.approx(xi @ om / (xi @ xi))

    def test_matrix_leakage(self):
        r = np.random.default_rng(3)
        xi, om = r.normal(size=50), r.normal(size=50)
        u = np.array([0.6, 0.8])
        S = np.diag([0.1, 0.2])
        expect = xi @ om / (xi @ xi - 50 * (0.36 * 0.1 + 0.64 * 0.2))
        assert corrected_b(xi, om, S, u) == pytest.approx(expect)
        with pytest.raises(ValueError):
            corrected_b(xi, om, S)

    def test_noise_exceeds_signal(self):
        xi = np.array([1.0, -1.0, 0.5])
        with pytest.raises(NumericalError, match="noise exceeds signal variance"):
            corrected_b(xi, xi, 10.0)

    def test_small_n(self):
        with pytest.raises(ValueError):
            corrected_b([1.0], [1.0], 0.0)

    def test_sim2_consistency(self):
        got = []
        for r in range(5):
            P = sim2_params(r)
            data, _ = simulate_pls(P, 10_000, NoiseSpec("B", 1.0, 1.0, sigma1_sq=1.0), 100 + r)
            fit = align_signs(fit_pls(data, FitConfig(3)), P.W, P.V)
            got.append(corrected_estimates(fit).b_corr)
        np.testing.assert_allclose(np.mean(got, axis=0), [9.0, 6.0, 4.0], rtol=0.02)

    def test_sim3_correction_beats_naive(self):
        P = sim3_params()
        better = 0
        for r in range(100):
            rng = np.random.default_rng([7, r])
            noise = noise_rate_spec(P.W, P.V, P.B, P.sigma_xi_sq, 0.5, "B")
            data, _ = simulate_pls(P, 1000, noise, rng)
            fit = align_signs(fit_pls(data, FitConfig(3)), P.W, P.V)
            ce = corrected_estimates(fit)
            better += np.linalg.norm(ce.b_corr - SIM3_B) < np.linalg.norm(fit.b_hat - SIM3_B)
        assert better >= 80


class TestClamping:
    def test_flags_when_noise_dominates(self):
        r = np.random.default_rng(4)
        z = r.standard_normal((300, 3))
        z = z - z.mean(axis=0)
        z[:, 2] -= z[:, :2] @ np.linalg.lstsq(z[:, :2], z[:, 2], rcond=None)[0]
        # a large third column exactly uncorrelated with Y dominates the residual
        X = np.column_stack([z[:, 0], z[:, 1], 10 * z[:, 2] / z[:, 2].std()])
        Y = np.column_stack([z[:, 0] + z[:, 1], z[:, 0] - 2 * z[:, 1]])
        ce = corrected_estimates(fit_pls(Dataset.from_raw(X, Y), FitConfig(2)))
        assert "variance clamped: latent" in ce.flags
        assert any(f.startswith("slope not corrected") for f in ce.flags)
        assert np.all(ce.sigma_xi_sq_corr >= 0)

    def test_monotone_in_noise(self):
        P = random_params(6, 5, 2, 11)
        means = []
        for lvl in (0.1, 0.5, 1.0):
            vals = [corrected_estimates(fit_pls(
                simulate_pls(P, 100, NoiseSpec("B", lvl, lvl, sigma1_sq=0.1), [int(lvl * 10), r])[0],
                FitConfig(2))).sigma_x_sq_corr for r in range(100)]
            means.append(np.mean(vals))
        assert means[0] <= means[1] <= means[2]


class TestBootstrap:
    def test_zero_noise_replicates_equal_base(self):
        _, fit, _ = _zero_noise_fit()
        boot = residual_bootstrap(fit, 10, seed=1)
        for rep in boot.replicates:
            np.testing.assert_allclose(rep.U_hat, fit.U_hat, atol=1e-10)
            np.testing.assert_allclose(rep.b_hat, fit.b_hat, rtol=1e-10)

    def test_deterministic(self, small_problem):
        _, data, _ = small_problem
        fit = fit_pls(data, FitConfig(2))
        a = residual_bootstrap(fit, 15, seed=3)
        b = residual_bootstrap(fit, 15, seed=3)
        for x, y in zip(a.replicates, b.replicates):
            np.testing.assert_array_equal(x.U_hat, y.U_hat)
            np.testing.assert_array_equal(x.b_hat, y.b_hat)

    def test_workers_do_not_change_result(self, small_problem):
        _, data, _ = small_problem
        fit = fit_pls(data, FitConfig(2))
        a = residual_bootstrap(fit, 12, seed=5)
        b = residual_bootstrap(fit, 12, seed=5, workers=4)
        for x, y in zip(a.replicates, b.replicates):
            np.testing.assert_array_equal(x.U_hat, y.U_hat)

    @pytest.mark.parametrize("variant", ["PLS_R", "PLS_SVD"])
    def test_identity_resampling(self, small_problem, variant):
        _, data, _ = small_problem
        fit = fit_pls(data, FitConfig(2, variant=variant))
        d = bootstrap_dataset(fit, np.arange(fit.n))
        Xr, Yr = data.raw()
        np.testing.assert_allclose(d.raw()[0], Xr, atol=1e-12)
        np.testing.assert_allclose(d.raw()[1], Yr, atol=1e-12)
        rep = align_to(refit(fit, d), fit)
        np.testing.assert_allclose(rep.U_hat, fit.U_hat, atol=1e-8)
        np.testing.assert_allclose(rep.V_hat, fit.V_hat, atol=1e-8)
        np.testing.assert_allclose(rep.b_hat, fit.b_hat, atol=1e-8)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_alignment(self, seed):
        r = np.random.default_rng(seed)
        P = random_params(5, 4, 2, seed % 100)
        data, _ = simulate_pls(P, 40, NoiseSpec("B", 0.5, 0.5, sigma1_sq=0.2), r)
        fit = fit_pls(data, FitConfig(2))
        U_ref = fit.U_hat * r.choice([-1.0, 1.0], 2)
        V_ref = fit.V_hat * r.choice([-1.0, 1.0], 2)
        once = align_signs(fit, U_ref, V_ref)
        twice = align_signs(once, U_ref, V_ref)
        np.testing.assert_array_equal(once.U_hat, twice.U_hat)
        np.testing.assert_array_equal(once.b_hat, twice.b_hat)
        assert np.all(np.sum(once.U_hat * U_ref, axis=0) >= 0)
        assert np.all(np.sum(once.V_hat * V_ref, axis=0) >= 0)
        # fitted responses do not depend on the sign convention
        np.testing.assert_allclose(once.xi_hat @ once.theta_hat.T, fit.xi_hat @ fit.theta_hat.T,
                                   atol=1e-10)

    def _failing_refit(self, monkeypatch, fail_every):
        calls = {"n": 0}
        real = inference.refit

        def flaky(fit, data):
            calls["n"] += 1
            if calls["n"] % fail_every == 0:
                raise NumericalError("injected")
            return real(fit, data)

        monkeypatch.setattr(inference, "refit", flaky)

    def test_failures_recorded(self, small_problem, monkeypatch):
        _, data, _ = small_problem
        fit = fit_pls(data, FitConfig(2))
        self._failing_refit(monkeypatch, 10)
        boot = residual_bootstrap(fit, 20, seed=0)
        assert len(boot.failures) == 2
        assert len(boot.replicates) == 18

    def test_failure_cap(self, small_problem, monkeypatch):
        _, data, _ = small_problem
        fit = fit_pls(data, FitConfig(2))
        self._failing_refit(monkeypatch, 5)
        with pytest.raises(NumericalError, match="replicates failed"):
            residual_bootstrap(fit, 20, seed=0)

    def test_bad_b(self, small_problem):
        _, data, _ = small_problem
        with pytest.raises(ValueError):
            residual_bootstrap(fit_pls(data, FitConfig(2)), 0)


class TestIntervals:
    def test_equal_replicates(self):
        _, fit, _ = _zero_noise_fit()
        table = intervals(BootstrapResult(5, [fit] * 5, fit))
        for name in table.lower:
            np.testing.assert_array_equal(table.lower[name], table.upper[name])
        np.testing.assert_allclose(table.point["U"], fit.U_hat)

    def test_order_statistics(self):
        vals = np.arange(1, 101, dtype=float)
        lo, mid, up = percentile_interval(vals, 0.95)
        assert lo == pytest.approx(3.475)
        assert up == pytest.approx(97.525)
        assert lo == pytest.approx(interpolated_quantile(vals, 0.025), abs=1e-12)
        assert mid == pytest.approx(interpolated_quantile(vals, 0.5), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60),
           st.floats(0.5, 0.99))
    def test_ordered_and_matches_oracle(self, vals, level):
        lo, mid, up = percentile_interval(vals, level)
        assert lo <= mid <= up
        a = (1 - level) / 2
        assert lo == pytest.approx(interpolated_quantile(vals, a), abs=1e-9)
        assert up == pytest.approx(interpolated_quantile(vals, 1 - a), abs=1e-9)

    def test_bad_level(self):
        with pytest.raises(ValueError):
            percentile_interval([1.0, 2.0], 1.0)

    def test_rows(self, small_problem):
        _, data, _ = small_problem
        boot = residual_bootstrap(fit_pls(data, FitConfig(2)), 25, seed=0)
        rows = intervals(boot).rows()
        assert ("U", "0.0") == rows[0][:2]
        assert all(r[2] <= r[3] <= r[4] for r in rows)

    def test_no_replicates(self):
        _, fit, _ = _zero_noise_fit()
        with pytest.raises(NumericalError):
            intervals(BootstrapResult(1, [], fit))


class TestPredictionInterval:
    def test_zero_noise_collapses(self):
        _, fit, _ = _zero_noise_fit()
        boot = residual_bootstrap(fit, 10, seed=0)
        X_new = fit.X0[:3] + fit.x_means
        lo, pt, up = predict_interval(boot, X_new)
        exact = predict(fit, X_new)
        np.testing.assert_allclose(lo, exact, atol=1e-8)
        np.testing.assert_allclose(up, exact, atol=1e-8)

    def test_wider_than_mean_band(self, small_problem):
        _, data, _ = small_problem
        boot = residual_bootstrap(fit_pls(data, FitConfig(2)), 60, seed=2)
        X_new = data.raw()[0][:5]
        lo, _, up = predict_interval(boot, X_new)
        mlo, _, mup = mean_interval(boot, X_new)
        assert np.all(up - lo >= mup - mlo)
