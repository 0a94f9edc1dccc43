"""Shared domain types, parameter validation and random matrix helpers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

ArrayOrScalar = Union[float, np.ndarray]

ORTHO_TOL = 1e-10
PSD_TOL = 1e-10


class NumericalError(RuntimeError):
    """Raised when a computation cannot proceed for numerical reasons."""

    def __init__(self, message: str, partial=None, diagnostics=None):
        super().__init__(message)
        self.partial = partial
        self.diagnostics = diagnostics


def as_rng(seed) -> np.random.Generator:
    """Return a Generator; accepts an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def canonicalize_sign(v) -> np.ndarray:
    """Flip ``v`` so that its largest-magnitude entry is nonnegative.

    Ties on magnitude go to the lowest index.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite entries")
    mag = np.abs(v)
    if mag.size == 0 or mag.max() == 0.0:
        raise NumericalError("degenerate direction")
    # argmax returns the first occurrence, which is the tie-break we want
    k = int(np.argmax(mag))
    return v.copy() if v[k] >= 0 else -v


def canonical_sign_factor(v) -> float:
    """+1 or -1, the factor ``canonicalize_sign`` would apply."""
    v = np.asarray(v, dtype=float)
    k = int(np.argmax(np.abs(v)))
    return 1.0 if v[k] >= 0 else -1.0


def canonicalize_columns(M) -> np.ndarray:
    M = np.array(M, dtype=float, copy=True)
    for j in range(M.shape[1]):
        M[:, j] = canonicalize_sign(M[:, j])
    return M


def random_orthonormal(rows: int, cols: int, seed) -> np.ndarray:
    """Random ``rows x cols`` matrix with orthonormal, sign-canonical columns."""
    if cols > rows:
        raise ValueError(f"cols ({cols}) > rows ({rows})")
    if cols < 1:
        raise ValueError("cols must be >= 1")
    rng = as_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((rows, cols)))
    # fix the sign of R's diagonal so the draw is Haar distributed
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return canonicalize_columns(Q * d)


def _check_spd(S: np.ndarray, name: str) -> None:
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(S, S.T, atol=1e-12 * max(1.0, np.abs(S).max())):
        raise ValueError(f"{name} not symmetric")
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} not positive definite") from None


def sample_inverse_wishart(scale, dof: int, seed) -> np.ndarray:
    """Draw from the inverse Wishart distribution IW(scale, dof).

    The draw is ``inv(A)`` with ``A ~ Wishart(inv(scale), dof)`` built by the
    Bartlett decomposition. Requires ``dof > dim - 1`` so the draw exists; the
    mean ``scale / (dof - dim - 1)`` is finite only when ``dof > dim + 1``.
    """
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    _check_spd(scale, "scale")
    dim = scale.shape[0]
    if dof <= dim - 1:
        raise ValueError(f"dof must exceed dim - 1 (dof={dof}, dim={dim})")
    rng = as_rng(seed)
    # Bartlett: A = L T T' L' with L = chol(inv(scale))
    L = np.linalg.cholesky(np.linalg.inv(scale))
    T = np.zeros((dim, dim))
    for i in range(dim):
        T[i, i] = np.sqrt(rng.chisquare(dof - i))
        T[i, :i] = rng.standard_normal(i)
    LT = L @ T
    # inv(LT LT') = inv(LT)' inv(LT)
    Linv = np.linalg.solve(LT, np.eye(dim))
    out = Linv.T @ Linv
    return 0.5 * (out + out.T)


def clip_psd(S, tol: float = PSD_TOL) -> np.ndarray:
    """Symmetrize and clip eigenvalues in [-tol, 0) to zero."""
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    if vals.min() < -tol * max(1.0, abs(vals).max()):
        raise ValueError("matrix not positive semidefinite")
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.T


@dataclass(frozen=True)
class ModelParams:
    """Generative PLS parameters.

    ``Sigma_X`` and ``Sigma_Y`` are scalars (variances) for the isotropic case
    and full matrices otherwise. ``Sigma_Y`` is the covariance of the response
    noise that is independent of the latent link noise.
    """

    W: np.ndarray
    V: np.ndarray
    B: np.ndarray
    sigma_xi_sq: np.ndarray
    noise_case: str = "B"
    Sigma_X: ArrayOrScalar = 0.0
    Sigma_Y: ArrayOrScalar = 0.0
    sigma1_sq: float = 0.0

    def __post_init__(self):
        for name in ("W", "V", "B", "sigma_xi_sq"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.noise_case not in ("A", "B", "C"):
            raise ValueError(f"unknown noise case {self.noise_case!r}")
        if self.W.ndim != 2 or self.V.ndim != 2:
            raise ValueError("W and V must be matrices")
        H = self.W.shape[1]
        if self.V.shape[1] != H or self.B.shape != (H,) or self.sigma_xi_sq.shape != (H,):
            raise ValueError("inconsistent component count")

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def q(self) -> int:
        return self.V.shape[0]

    @property
    def H(self) -> int:
        return self.W.shape[1]

    @property
    def theta(self) -> np.ndarray:
        """q x H regression coefficients, column h equal to b_h v_h."""
        return self.V * self.B

    def sigma_x_matrix(self) -> np.ndarray:
        return _noise_matrix(self.Sigma_X, self.p)

    def sigma_y_matrix(self) -> np.ndarray:
        return _noise_matrix(self.Sigma_Y, self.q)


def _noise_matrix(S, dim: int) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim == 0:
        return float(S) * np.eye(dim)
    return S


@dataclass(frozen=True)
class Dataset:
    """Centered predictor/response pair with the removed column means."""

    X: np.ndarray
    Y: np.ndarray
    x_means: np.ndarray
    y_means: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    @classmethod
    def from_raw(cls, X, Y) -> "Dataset":
        """Center raw data and record the column means."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] != Y.shape[0]:
            raise ValueError("X and Y row counts differ")
        if X.shape[0] < 2:
            raise ValueError("need n >= 2")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("non-finite entries")
        xm = X.mean(axis=0)
        ym = Y.mean(axis=0)
        return cls(X - xm, Y - ym, xm, ym)

    def raw(self):
        """Uncentered (X, Y)."""
        return self.X + self.x_means, self.Y + self.y_means


@dataclass(frozen=True)
class GroundTruth:
    """Latent scores and noise draws retained by the simulators (centered)."""

    xi: np.ndarray
    omega: np.ndarray
    X_H: np.ndarray
    Y_H: np.ndarray
    eps: np.ndarray


@dataclass(frozen=True)
class FitResult:
    """Output of a component-wise fit.

    ``P_hat`` holds the X loadings used for deflation: it equals ``U_hat`` under
    the default weight deflation and ``X'xi / xi'xi`` under score deflation.
    ``f_coef`` is set only for polynomial response maps.
    """

    variant: str
    U_hat: np.ndarray
    V_hat: np.ndarray
    xi_hat: np.ndarray
    omega_hat: np.ndarray
    b_hat: np.ndarray
    theta_hat: np.ndarray
    X_resid: np.ndarray
    Y_resid: np.ndarray
    eps_hat: np.ndarray
    x_means: np.ndarray
    y_means: np.ndarray
    P_hat: np.ndarray
    X0: np.ndarray
    Y0: np.ndarray
    config: object = None
    f_coef: Optional[np.ndarray] = None
    f_degree: int = 1

    @property
    def H(self) -> int:
        return self.U_hat.shape[1]

    @property
    def n(self) -> int:
        return self.xi_hat.shape[0]

    def fitted_Y(self) -> np.ndarray:
        """Centered in-sample fitted responses."""
        if self.variant == "PLS_SVD" and self.f_coef is None:
            # PLS-SVD deflates Y by its own scores, so Y0 - Y_resid is not the regression part
            return self.xi_hat @ self.theta_hat.T
        return self.Y0 - self.Y_resid


@dataclass(frozen=True)
class CorrectedEstimates:
    sigma_x_sq_corr: ArrayOrScalar
    sigma_y_sq_corr: ArrayOrScalar
    sigma_xi_sq_corr: np.ndarray
    b_corr: np.ndarray
    sigma1_sq_corr: float
    sigma1_sq_per_h: np.ndarray
    flags: tuple = field(default_factory=tuple)


def validate_params(params: ModelParams) -> list:
    """List the violated model constraints; empty means valid."""
    out = []
    W, V, H = params.W, params.V, params.H
    if H > min(params.p, params.q):
        out.append("H > min(p, q)")
    if not np.allclose(W.T @ W, np.eye(H), atol=ORTHO_TOL, rtol=0):
        out.append("W not orthonormal")
    if not np.allclose(V.T @ V, np.eye(H), atol=ORTHO_TOL, rtol=0):
        out.append("V not orthonormal")
    for name, M in (("W", W), ("V", V)):
        for j in range(H):
            col = M[:, j]
            if np.abs(col).max() > 0 and canonical_sign_factor(col) < 0:
                out.append(f"{name} column {j} not sign-canonical")
    if np.any(params.sigma_xi_sq <= 0):
        out.append("latent variances must be positive")
    sb = params.sigma_xi_sq * np.abs(params.B)
    if np.any(np.diff(sb) >= 0):
        out.append("s²·b not strictly decreasing")
    for name, S in (("Sigma_X", params.Sigma_X), ("Sigma_Y", params.Sigma_Y)):
        S = np.asarray(S, dtype=float)
        if S.ndim == 0:
            if S < -PSD_TOL:
                out.append(f"{name} negative variance")
        elif not np.allclose(S, S.T, atol=1e-10) or np.linalg.eigvalsh(0.5 * (S + S.T)).min() < -PSD_TOL:
            out.append(f"{name} not symmetric PSD")
    if params.sigma1_sq < 0:
        out.append("sigma1_sq negative")
    return out


def dual_basis(W) -> np.ndarray:
    """Minimum-norm U with U'W = I (``W`` must have full column rank).

    For orthonormal ``W`` the solution is ``W`` itself.
    """
    W = np.asarray(W, dtype=float)
    return W @ np.linalg.inv(W.T @ W)


def model_covariance(params: ModelParams):
    """Population covariance blocks (Sxx, Sxy, Syy) implied by ``params``."""
    W, V, B, s2 = params.W, params.V, params.B, params.sigma_xi_sq
    Sxx = (W * s2) @ W.T + params.sigma_x_matrix()
    Sxy = (W * (s2 * B)) @ V.T
    Syy = (V * (B**2 * s2 + params.sigma1_sq)) @ V.T + params.sigma_y_matrix()
    return Sxx, Sxy, Syy


def params_from_covariance(Sxx, Sxy, Syy, H: int, noise_case: str = "B") -> ModelParams:
    """Recover isotropic-noise parameters from model covariance blocks.

    Weights come from the SVD of the cross block; the noise levels from the
    trace of each block outside the weight span. Requires ``p, q > H`` unless
    the noise is zero.
    """
    p, q = Sxy.shape
    Uf, sv, Vtf = np.linalg.svd(Sxy)
    W = canonicalize_columns(Uf[:, :H])
    V = canonicalize_columns(Vtf[:H].T)
    sb = np.einsum("ih,ij,jh->h", W, Sxy, V)
    Px = np.eye(p) - W @ W.T
    Py = np.eye(q) - V @ V.T
    sx = np.trace(Px @ Sxx) / (p - H) if p > H else 0.0
    sy = np.trace(Py @ Syy) / (q - H) if q > H else 0.0
    s2 = np.einsum("ih,ij,jh->h", W, Sxx, W) - sx
    B = sb / s2
    s1 = float(np.mean(np.einsum("ih,ij,jh->h", V, Syy, V) - B**2 * s2 - sy))
    return ModelParams(W, V, B, s2, noise_case, sx, sy, s1)


def params_equal(a: ModelParams, b: ModelParams, tol: float = 1e-8) -> bool:
    if a.W.shape != b.W.shape or a.V.shape != b.V.shape:
        return False
    pairs = [(a.W, b.W), (a.V, b.V), (a.B, b.B), (a.sigma_xi_sq, b.sigma_xi_sq),
             (a.sigma_x_matrix(), b.sigma_x_matrix()), (a.sigma_y_matrix(), b.sigma_y_matrix()),
             (a.sigma1_sq, b.sigma1_sq)]
    return all(np.allclose(x, y, atol=tol, rtol=0) for x, y in pairs)


def with_noise(params: ModelParams, **kw) -> ModelParams:
    return replace(params, **kw)
