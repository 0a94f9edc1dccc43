"""Forward simulation from the generative PLS model and the GFLSR test scenarios."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (Dataset, GroundTruth, ModelParams, as_rng, canonicalize_columns,
                   clip_psd, random_orthonormal, sample_inverse_wishart, validate_params)
from .psi import PsiFamily, norm_ppf


@dataclass(frozen=True)
class NoiseSpec:
    """Noise configuration for ``simulate_pls``.

    case "A": zero noise, or with ``projected=True`` the covariances
    sigma_x_sq (I - WW') and sigma_y_sq (I - VV').
    case "B": isotropic sigma_x_sq I and sigma_y_sq I.
    case "C": general covariances Sigma_X, Sigma_Y.

    latent_dist is "normal" (xi = s Phi^-1(U)) or "exponential" (xi = s (E - 1)).
    shared_u draws one uniform for all components and uses Hermite orders
    1..H as the coupling curves. orthogonal_scores replaces the sampled latent
    columns by centered, mutually orthogonal columns with empirical variance
    exactly s_h^2, removing finite-sample cross-correlation.
    """

    case: str = "B"
    sigma_x_sq: float = 0.0
    sigma_y_sq: float = 0.0
    Sigma_X: Optional[np.ndarray] = None
    Sigma_Y: Optional[np.ndarray] = None
    sigma1_sq: float = 0.0
    latent_dist: str = "normal"
    projected: bool = False
    shared_u: bool = False
    orthogonal_scores: bool = False

    def covariances(self, params: ModelParams):
        """(Sigma_X, Sigma_Y) as full matrices for ``params``."""
        p, q = params.p, params.q
        if self.case == "A":
            if not self.projected:
                return np.zeros((p, p)), np.zeros((q, q))
            W, V = params.W, params.V
            return (self.sigma_x_sq * (np.eye(p) - W @ W.T),
                    self.sigma_y_sq * (np.eye(q) - V @ V.T))
        if self.case == "B":
            return self.sigma_x_sq * np.eye(p), self.sigma_y_sq * np.eye(q)
        if self.case == "C":
            if self.Sigma_X is None or self.Sigma_Y is None:
                raise ValueError("case C needs Sigma_X and Sigma_Y")
            return clip_psd(self.Sigma_X), clip_psd(self.Sigma_Y)
        raise ValueError(f"unknown noise case {self.case!r}")

    def apply(self, params: ModelParams) -> ModelParams:
        """Copy of ``params`` carrying this noise configuration."""
        Sx, Sy = self.covariances(params)
        if self.case == "B":
            Sx, Sy = float(self.sigma_x_sq), float(self.sigma_y_sq)
        return ModelParams(params.W, params.V, params.B, params.sigma_xi_sq, self.case,
                           Sx, Sy, float(self.sigma1_sq))


def noise_from_params(params: ModelParams) -> NoiseSpec:
    Sx, Sy = np.asarray(params.Sigma_X), np.asarray(params.Sigma_Y)
    if params.noise_case == "B" and Sx.ndim == 0 and Sy.ndim == 0:
        return NoiseSpec("B", float(Sx), float(Sy), sigma1_sq=params.sigma1_sq)
    return NoiseSpec("C", Sigma_X=params.sigma_x_matrix(), Sigma_Y=params.sigma_y_matrix(),
                     sigma1_sq=params.sigma1_sq)


def _mvn(rng: np.random.Generator, S: np.ndarray, n: int) -> np.ndarray:
    """n draws from N(0, S) with S only PSD (symmetric square root)."""
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return rng.standard_normal((n, S.shape[0])) @ root.T


def draw_latents(n: int, s: np.ndarray, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """n x H latent scores xi_h = s_h Psi_h(U_h)."""
    H = len(s)
    if noise.latent_dist == "exponential":
        Z = rng.exponential(1.0, size=(n, H)) - 1.0
    elif noise.latent_dist == "normal":
        if noise.shared_u:
            z = norm_ppf(rng.uniform(size=n))
            Z = np.column_stack([PsiFamily.hermite(h + 1).of_z(z) for h in range(H)])
        else:
            Z = norm_ppf(rng.uniform(size=(n, H)))
    else:
        raise ValueError(f"unknown latent distribution {noise.latent_dist!r}")
    if noise.orthogonal_scores:
        if n <= H:
            raise ValueError("orthogonal_scores needs n > H")
        Q, R = np.linalg.qr(Z - Z.mean(axis=0))
        Z = Q * np.sign(np.diag(R)) * np.sqrt(n)
    return Z * np.sqrt(s)


def simulate_pls(params: ModelParams, n: int, noise: Optional[NoiseSpec] = None, seed=None):
    """Draw a centered dataset from the generative PLS model.

    Returns (Dataset, GroundTruth). The response is built as
    Y = omega V' + Y_H with omega = xi B + eps, which is at once the PLS-SVD form
    and the PLS-R form Y = xi Theta' + (eps V' + Y_H).
    """
    bad = validate_params(params)
    if bad:
        raise ValueError("invalid params: " + "; ".join(bad))
    if n < 2:
        raise ValueError("need n >= 2")
    if noise is None:
        noise = noise_from_params(params)
    xi, eps, X_H, Y_H = _draw_pieces(params, n, noise, as_rng(seed))
    # center every random piece so the identities hold exactly on centered data
    xi, eps, X_H, Y_H = (a - a.mean(axis=0) for a in (xi, eps, X_H, Y_H))
    omega = xi * params.B + eps
    X = xi @ params.W.T + X_H
    Y = omega @ params.V.T + Y_H
    data = Dataset(X, Y, np.zeros(params.p), np.zeros(params.q))
    return data, GroundTruth(xi, omega, X_H, Y_H, eps)


def _draw_pieces(params: ModelParams, n: int, noise: NoiseSpec, rng: np.random.Generator):
    Sx, Sy = noise.covariances(params)
    xi = draw_latents(n, params.sigma_xi_sq, noise, rng)
    eps = rng.standard_normal((n, params.H)) * np.sqrt(noise.sigma1_sq)
    return xi, eps, _mvn(rng, Sx, n), _mvn(rng, Sy, n)


def draw_pls_rows(params: ModelParams, m: int, noise: Optional[NoiseSpec] = None, seed=None):
    """Uncentered rows (X, Y, xi) from the model, e.g. for held-out test points.

    Latents are drawn independently even if ``noise.orthogonal_scores`` is set.
    """
    if noise is None:
        noise = noise_from_params(params)
    noise = replace(noise, orthogonal_scores=False)
    xi, eps, X_H, Y_H = _draw_pieces(params, m, noise, as_rng(seed))
    X = xi @ params.W.T + X_H
    Y = (xi * params.B + eps) @ params.V.T + Y_H
    return X, Y, xi


def paper_loadings_sim3(p: int = 20, q: int = 20, H: int = 3):
    """Smooth normal-density loading curves, orthonormalized and sign-fixed.

    Entry (j, k) before orthonormalization is the unit-variance normal density
    centred at k/10 evaluated at (1/2 + j/10) k for W, and at (3/5 + j/10) k for V.
    """
    if H > min(p, q):
        raise ValueError("H > min(p, q)")

    def curves(rows, offset):
        j = np.arange(1, rows + 1)[:, None]
        k = np.arange(1, H + 1)[None, :]
        x = (offset + j / 10.0) * k
        return np.exp(-0.5 * (x - k / 10.0) ** 2) / np.sqrt(2 * np.pi)

    def gram_schmidt(M):
        Q = np.zeros_like(M)
        for c in range(M.shape[1]):
            v = M[:, c].copy()
            for _ in range(2):  # second pass restores orthogonality in floating point
                v -= Q[:, :c] @ (Q[:, :c].T @ v)
            Q[:, c] = v / np.linalg.norm(v)
        return Q

    W = canonicalize_columns(gram_schmidt(curves(p, 0.5)))
    V = canonicalize_columns(gram_schmidt(curves(q, 0.6)))
    return W, V


SIM3_B = np.array([1.5, 1.11, 0.82])
SIM3_SXI = np.array([1.0, 0.9, 0.82])


def noise_rate_spec(W, V, B, s2, alpha: float, case: str = "B", seed=None,
                    iw_alpha: float = 0.5) -> NoiseSpec:
    """Noise levels for a target noise proportion alpha.

    sigma_x^2 gives tr(Sigma_X) / tr(Var X) = alpha, sigma_1^2 gives
    sigma_1^2 / Var(omega_1) = alpha, and sigma_y^2 gives
    tr(Sigma_Y) / tr(Var Y) = alpha. Case "C" draws Sigma_X, Sigma_Y from an
    inverse Wishart with scale sigma^2 I (sigma^2 taken at ``iw_alpha``) and
    dof = dim + 1.
    """
    p, q = W.shape[0], V.shape[0]
    B, s2 = np.asarray(B), np.asarray(s2)

    def levels(a):
        sx = a * s2.sum() / (p * (1 - a))
        s1 = a * B[0] ** 2 * s2[0] / (1 - a)
        sy = a * np.sum(B**2 * s2 + s1) / (q * (1 - a))
        return sx, sy, s1

    sx, sy, s1 = levels(alpha)
    if case == "B":
        return NoiseSpec("B", sx, sy, sigma1_sq=s1)
    if case == "C":
        rng = as_rng(seed)
        sx_iw, sy_iw, _ = levels(iw_alpha)
        Sx = sample_inverse_wishart(sx_iw * np.eye(p), p + 1, rng)
        Sy = sample_inverse_wishart(sy_iw * np.eye(q), q + 1, rng)
        return NoiseSpec("C", Sigma_X=Sx, Sigma_Y=Sy, sigma1_sq=s1)
    raise ValueError(f"unsupported case {case!r}")


def sim3_params() -> ModelParams:
    W, V = paper_loadings_sim3(20, 20, 3)
    return ModelParams(W, V, SIM3_B, SIM3_SXI)


def random_params(p: int, q: int, H: int, seed, s_range=(6.0, 10.0), b_range=(0.5, 2.0),
                  min_ratio: float = 1.0) -> ModelParams:
    """Random valid parameters with s_h^2 b_h strictly decreasing.

    Latent standard deviations are drawn from ``s_range`` and slopes from
    ``b_range``; the pairs are sorted by s^2 b and redrawn until consecutive
    values of s^2 b differ by at least the factor ``min_ratio``.
    """
    rng = as_rng(seed)
    W = random_orthonormal(p, H, rng)
    V = random_orthonormal(q, H, rng)
    while True:
        s = rng.uniform(*s_range, size=H)
        b = rng.uniform(*b_range, size=H)
        order = np.argsort(-(s**2) * b)
        s, b = s[order], b[order]
        sb = s**2 * b
        if np.all(sb[:-1] > min_ratio * sb[1:]) and np.all(-np.diff(sb) > 1e-3 * sb[0]):
            return ModelParams(W, V, b, s**2)


SCENARIOS = ("S1_linear_single", "S2_nonlinear_single", "S3_linear_multi", "S4_nonlinear_multi")
_DIMS = {"S1_linear_single": (2, 1, 1), "S2_nonlinear_single": (2, 1, 2),
         "S3_linear_multi": (2, 2, 2), "S4_nonlinear_multi": (3, 3, 3)}


@dataclass(frozen=True)
class GflsrScenario:
    """One of the four nonlinear/multi-response test situations.

    ``x_var`` and ``y_var`` are the noise variances added at each layer;
    ``None`` uses the situation's own values (S1: 0.02 and 0.02, others:
    1e-4 and 0.02). ``noise_scale`` multiplies every noise standard deviation.
    """

    id: str
    x_var: Optional[float] = None
    y_var: Optional[float] = None
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.id not in _DIMS:
            raise ValueError(f"unknown scenario {self.id!r}")

    @property
    def dims(self):
        return _DIMS[self.id]

    def _vars(self):
        xv = self.x_var if self.x_var is not None else (0.02 if self.id == SCENARIOS[0] else 1e-4)
        yv = self.y_var if self.y_var is not None else 0.02
        return xv, yv

    def true_f(self, xi: np.ndarray) -> np.ndarray:
        """Noiseless responses as a function of the latent scores (n x q)."""
        xi = np.atleast_2d(xi)
        x1 = xi[:, 0]
        if self.id == "S1_linear_single":
            return (2 * x1)[:, None]
        x2 = xi[:, 1]
        if self.id == "S2_nonlinear_single":
            return (np.exp(x1) + x2**2)[:, None]
        if self.id == "S3_linear_multi":
            return np.column_stack([3 * x2, 3 * x1 + 0.9 * x2])
        x3 = xi[:, 2]
        y2 = np.column_stack([x3**2, x3**3, 0.3 * x3**2 - 0.5 * x3**3])
        y1 = np.column_stack([x2, x2**2, 0.3 * x2 - 0.5 * x2**2]) + y2
        return np.column_stack([x1**3, x1, 1.3 * x1 - 0.5 * x1**3]) + y1

    @property
    def W(self) -> np.ndarray:
        """Unnormalized X weight columns of the generating recursion."""
        return {"S1_linear_single": np.array([[3.0], [2.0]]),
                "S2_nonlinear_single": np.array([[3.0, 1.0], [1.0, 1.0]]),
                "S3_linear_multi": np.array([[1.0, 1.0], [1.0, 2.0]]),
                "S4_nonlinear_multi": np.array([[3.0, 2.0, 3.0], [1.0, 6.0, 3.0], [2.0, 1.0, 1.0]])}[self.id]


def simulate_gflsr(scenario: GflsrScenario, n: int, seed=None):
    """Generate one dataset by the situation's backward recursion.

    Returns (Dataset, GroundTruth); the Dataset is centered. Noise enters X
    only at the deepest layer and Y at the layers where the recursion adds it.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = as_rng(seed)
    p, q, H = scenario.dims
    xv, yv = scenario._vars()
    sx = np.sqrt(xv) * scenario.noise_scale
    sy = np.sqrt(yv) * scenario.noise_scale
    xi = norm_ppf(rng.uniform(size=(n, H)))
    nx = lambda k: sx * rng.standard_normal((n, k))  # noqa: E731
    ny = lambda k: sy * rng.standard_normal((n, k))  # noqa: E731

    sid = scenario.id
    x1 = xi[:, 0]
    if sid == "S1_linear_single":
        X_H = nx(2)
        X = np.column_stack([3 * x1, 2 * x1]) + X_H
        Y_H = ny(1)
        Y = (2 * x1)[:, None] + Y_H
        omega = (2 * x1)[:, None]
    elif sid == "S2_nonlinear_single":
        x2 = xi[:, 1]
        X_H = nx(2)
        X = np.column_stack([3 * x1, x1]) + np.column_stack([x2, x2]) + X_H
        Y_H = ny(1)
        Y = (np.exp(x1) + x2**2)[:, None] + Y_H
        w2 = x2**2 + ny(1)[:, 0]
        omega = np.column_stack([np.exp(x1) + w2 + ny(1)[:, 0], w2])
    elif sid == "S3_linear_multi":
        x2 = xi[:, 1]
        X_H = nx(2)
        X = np.column_stack([x1, x1]) + np.column_stack([x2, 2 * x2]) + X_H
        Y1 = np.column_stack([3 * x2, 0.9 * x2]) + ny(2)
        e0 = ny(2)
        Y = np.column_stack([Y1[:, 0] + e0[:, 0], 3 * x1 + 0.9 * x2 + e0[:, 1]])
        Y_H = Y - scenario.true_f(xi)
        omega = np.column_stack([3 * x1 + ny(1)[:, 0], x2**2 + ny(1)[:, 0]])
    else:
        x2, x3 = xi[:, 1], xi[:, 2]
        X_H = nx(3)
        X2 = np.outer(x3, [3.0, 3.0, 1.0]) + X_H
        X1 = np.outer(x2, [2.0, 6.0, 1.0]) + X2
        X = np.outer(x1, [3.0, 1.0, 2.0]) + X1
        Y_H = ny(3)
        Y = scenario.true_f(xi) + Y_H
        omega = xi + ny(3)

    eps = np.zeros((n, H))
    Xm, Ym = X.mean(axis=0), Y.mean(axis=0)
    data = Dataset(X - Xm, Y - Ym, Xm, Ym)
    return data, GroundTruth(xi, omega, X_H, Y_H, eps)
