import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import sim2_params
from gflsr.core import (Dataset, ModelParams, NumericalError, canonicalize_sign, dual_basis,
                        model_covariance, params_equal, params_from_covariance,
                        random_orthonormal, sample_inverse_wishart, validate_params)
from gflsr.simulate import random_params, sim3_params

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vectors = arrays(float, st.integers(1, 8), elements=finite).filter(lambda v: np.abs(v).max() > 1e-9)


class TestCanonicalizeSign:
    def test_flip_forced_by_dominant_entry(self):
        np.testing.assert_array_equal(canonicalize_sign([-3.0, 1.0]), [3.0, -1.0])

    def test_already_canonical(self):
        np.testing.assert_array_equal(canonicalize_sign([0.6, 0.8]), [0.6, 0.8])

    def test_tie_goes_to_lowest_index(self):
        v = np.array([-0.5, 0.5])
        # enumerate both candidates: only one has a nonnegative entry at index 0
        candidates = [c for c in (v, -v) if c[0] >= 0]
        assert len(candidates) == 1
        np.testing.assert_array_equal(canonicalize_sign(v), candidates[0])
        np.testing.assert_array_equal(canonicalize_sign(v), [0.5, -0.5])

    def test_zero_vector(self):
        with pytest.raises(NumericalError, match="degenerate direction"):
            canonicalize_sign([0.0, 0.0])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            canonicalize_sign([np.nan, 1.0])

    @settings(max_examples=200, deadline=None)
    @given(vectors)
    def test_idempotent_and_negation_invariant(self, v):
        f = canonicalize_sign(v)
        np.testing.assert_array_equal(canonicalize_sign(f), f)
        np.testing.assert_array_equal(canonicalize_sign(-v), f)
        k = int(np.argmax(np.abs(v)))
        assert f[k] >= 0


class TestRandomOrthonormal:
    def test_square(self):
        Q = random_orthonormal(3, 3, 1)
        np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)

    def test_deterministic(self):
        np.testing.assert_array_equal(random_orthonormal(5, 2, 9), random_orthonormal(5, 2, 9))

    def test_seeds_differ(self):
        assert np.linalg.norm(random_orthonormal(5, 2, 1) - random_orthonormal(5, 2, 2)) > 0

    def test_canonical_columns(self):
        Q = random_orthonormal(7, 4, 3)
        for j in range(4):
            np.testing.assert_array_equal(canonicalize_sign(Q[:, j]), Q[:, j])

    def test_too_many_columns(self):
        with pytest.raises(ValueError):
            random_orthonormal(2, 3, 0)


class TestInverseWishart:
    def test_simulation_config_is_psd(self):
        S = sample_inverse_wishart(0.5 * np.eye(10), 11, 0)
        assert np.linalg.eigvalsh(S).min() > 0
        np.testing.assert_allclose(S, S.T, atol=1e-12)

    def test_scalar_mean(self):
        # 1x1 IW(2, 5) is inverse gamma(5/2, 1) with mean 2 / (5 - 2)
        rng = np.random.default_rng(0)
        draws = np.array([sample_inverse_wishart([[2.0]], 5, rng)[0, 0] for _ in range(100_000)])
        assert draws.mean() == pytest.approx(2 / 3, rel=0.05)
        # Monte Carlo oracle from the same inverse-gamma law
        oracle = 2.0 / np.random.default_rng(1).chisquare(5, 100_000)
        assert draws.mean() == pytest.approx(oracle.mean(), rel=0.05)

    def test_matrix_mean(self):
        rng = np.random.default_rng(3)
        scale = np.array([[2.0, 0.5], [0.5, 1.0]])
        draws = np.mean([sample_inverse_wishart(scale, 8, rng) for _ in range(20_000)], axis=0)
        np.testing.assert_allclose(draws, scale / (8 - 2 - 1), rtol=0.08, atol=0.01)

    def test_symmetric_output(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            S = sample_inverse_wishart(np.diag([1.0, 2.0, 3.0]), 4, rng)
            assert np.max(np.abs(S - S.T)) <= 1e-12 * np.abs(S).max()

    def test_bad_scale(self):
        with pytest.raises(ValueError, match="positive definite"):
            sample_inverse_wishart(np.array([[1.0, 2.0], [2.0, 1.0]]), 5, 0)

    def test_bad_dof(self):
        with pytest.raises(ValueError, match="dof"):
            sample_inverse_wishart(np.eye(3), 2, 0)


class TestValidateParams:
    def test_simulation_two_params_valid(self):
        assert validate_params(sim2_params(0)) == []

    def test_equal_products_rejected(self):
        W = np.eye(3)[:, :2]
        P = ModelParams(W, W, [1.0, 1.0], [1.0, 1.0])
        assert "s²·b not strictly decreasing" in validate_params(P)

    def test_duplicated_column(self):
        w = np.array([1.0, 0.0, 0.0])
        P = ModelParams(np.column_stack([w, w]), np.eye(3)[:, :2], [2.0, 1.0], [1.0, 1.0])
        assert "W not orthonormal" in validate_params(P)

    def test_non_canonical_and_bad_noise(self):
        W = -np.eye(3)[:, :1]
        P = ModelParams(W, np.eye(3)[:, :1], [1.0], [1.0], "C",
                        Sigma_X=-np.eye(3), Sigma_Y=np.eye(3))
        v = validate_params(P)
        assert any("sign-canonical" in s for s in v)
        assert any("Sigma_X" in s for s in v)

    def test_too_many_components(self):
        W = np.eye(3)
        V = np.zeros((2, 3))
        P = ModelParams(W, V, [3.0, 2.0, 1.0], [1.0, 1.0, 1.0])
        assert "H > min(p, q)" in validate_params(P)

    @pytest.mark.parametrize("seed", range(10))
    def test_generators_produce_valid_params(self, seed):
        assert validate_params(random_params(8, 6, 3, seed)) == []

    def test_sim3_params_valid(self):
        assert validate_params(sim3_params()) == []


class TestUnitDualBasis:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_unit_solution_of_UtW_equals_W(self, p, H, seed):
        H = min(H, p)
        W = random_orthonormal(p, H, seed)
        # minimum-norm solution of U'W = I by least squares, independent of dual_basis
        U = np.linalg.lstsq(W.T, np.eye(H), rcond=None)[0]
        np.testing.assert_allclose(np.linalg.norm(U, axis=0), 1.0, atol=1e-10)
        assert np.linalg.norm(U - W) < 1e-8
        assert np.linalg.norm(dual_basis(W) - W) < 1e-8


class TestDataset:
    def test_centering_record(self, rng):
        X = rng.normal(3.0, 2.0, (50, 4))
        Y = rng.normal(-1.0, 1.0, (50, 2))
        d = Dataset.from_raw(X, Y)
        assert np.all(np.abs(d.X.mean(axis=0)) <= 1e-10 * d.X.std(axis=0))
        Xr, Yr = d.raw()
        np.testing.assert_allclose(Xr, X)
        np.testing.assert_allclose(Yr, Y)

    def test_vector_response(self, rng):
        assert Dataset.from_raw(rng.normal(size=(5, 2)), rng.normal(size=5)).q == 1

    @pytest.mark.parametrize("X,Y", [
        (np.ones((1, 2)), np.ones((1, 1))),
        (np.ones((3, 2)), np.ones((2, 1))),
        (np.array([[1.0, np.inf], [0.0, 1.0]]), np.ones((2, 1))),
    ])
    def test_rejects(self, X, Y):
        with pytest.raises(ValueError):
            Dataset.from_raw(X, Y)


class TestCovarianceRoundTrip:
    @pytest.mark.parametrize("seed", range(5))
    def test_params_from_covariance(self, seed):
        P = random_params(7, 6, 3, seed)
        P = ModelParams(P.W, P.V, P.B, P.sigma_xi_sq, "B", 0.3, 0.2, 0.1)
        Q = params_from_covariance(*model_covariance(P), P.H)
        assert params_equal(P, Q, tol=1e-8)
