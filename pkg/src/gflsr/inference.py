"""Bias-corrected variance and slope estimators and the residual bootstrap."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import CorrectedEstimates, Dataset, FitResult, NumericalError
from .fit import FitConfig, fit_gflsr, fit_pls, predict

PINV_RTOL = 1e-10
MAX_FAIL_FRACTION = 0.10


def _cov(M: np.ndarray) -> np.ndarray:
    return M.T @ M / M.shape[0]


def _deflation_projector(U: np.ndarray) -> np.ndarray:
    return np.eye(U.shape[0]) - U @ U.T


def corrected_noise(resid_cov: np.ndarray, U: np.ndarray, assumption: str, fill_null: bool = True):
    """Noise estimate from the covariance of the deflated data.

    Case "B" returns the scalar mean diag(resid_cov) / mean diag(P P'), with
    P = I - UU'. Case "C" returns pinv(P) resid_cov; because P is singular on
    span(U), that block is left empty by the pseudo-inverse, and with
    ``fill_null`` it is filled by the average observable variance so that an
    isotropic input gives back sigma^2 I.
    """
    P = _deflation_projector(U)
    if assumption == "B":
        return float(np.mean(np.diag(resid_cov)) / np.mean(np.diag(P @ P.T)))
    if assumption == "C":
        S = np.linalg.pinv(P, rcond=PINV_RTOL) @ resid_cov
        S = 0.5 * (S + S.T)
        if fill_null:
            rank = U.shape[0] - U.shape[1]
            level = np.trace(S) / rank if rank > 0 else 0.0
            S = S + level * (U @ U.T)
        return S
    raise ValueError(f"assumption must be 'B' or 'C', got {assumption!r}")


def _quad(S, u: np.ndarray) -> float:
    S = np.asarray(S, dtype=float)
    return float(S) * float(u @ u) if S.ndim == 0 else float(u @ S @ u)


def corrected_b(xi_hat, omega_hat, sigma_x_corr, u_hat=None) -> float:
    """Measurement-error corrected slope xi'omega / (xi'xi - n * leakage).

    ``sigma_x_corr`` is a scalar variance or a covariance matrix; with a matrix
    the leakage is u' S u.
    """
    xi = np.asarray(xi_hat, dtype=float).ravel()
    om = np.asarray(omega_hat, dtype=float).ravel()
    n = xi.size
    if n < 2:
        raise ValueError("need n >= 2")
    S = np.asarray(sigma_x_corr, dtype=float)
    if S.ndim == 0:
        leak = float(S)
    else:
        if u_hat is None:
            raise ValueError("u_hat required with a covariance matrix")
        leak = _quad(S, np.asarray(u_hat, dtype=float))
    den = xi @ xi - n * leak
    if den <= 0:
        raise NumericalError("noise exceeds signal variance")
    return float(xi @ om / den)


def corrected_estimates(fit: FitResult, assumption: str = "B", fill_null: bool = True) -> CorrectedEstimates:
    """Corrected noise, latent-variance, slope and link-noise estimates.

    The deflated data are X0 (I - UU') and Y0 (I - VV'). Negative variances
    are clamped to 0 and flagged; a slope whose corrected denominator is not
    positive falls back to the plain estimate and is flagged.
    """
    X0, Y0 = fit.X0, fit.Y0
    U, V = fit.U_hat, fit.V_hat
    flags = []
    varX = _cov(X0)
    varY = _cov(Y0)
    sx = corrected_noise(_cov(X0 @ _deflation_projector(U)), U, assumption, fill_null)
    sy = corrected_noise(_cov(Y0 @ _deflation_projector(V)), V, assumption, fill_null)
    if assumption == "B":
        if sx < 0:
            flags.append("variance clamped: sigma_x")
            sx = 0.0
        if sy < 0:
            flags.append("variance clamped: sigma_y")
            sy = 0.0
    H = fit.H
    s2 = np.array([_quad(varX, U[:, h]) - _quad(sx, U[:, h]) for h in range(H)])
    if np.any(s2 < 0):
        flags.append("variance clamped: latent")
        s2 = np.clip(s2, 0.0, None)
    b = np.zeros(H)
    for h in range(H):
        try:
            b[h] = corrected_b(fit.xi_hat[:, h], fit.omega_hat[:, h], sx, U[:, h])
        except NumericalError:
            flags.append(f"slope not corrected: component {h}")
            b[h] = fit.b_hat[h]
    s1_h = np.array([_quad(varY, V[:, h]) - _quad(sy, V[:, h]) - b[h] ** 2 * s2[h] for h in range(H)])
    s1 = float(np.mean(s1_h))
    if s1 < 0:
        flags.append("variance clamped: sigma1")
        s1 = 0.0
    return CorrectedEstimates(sx, sy, s2, b, s1, s1_h, tuple(flags))


@dataclass
class BootstrapResult:
    B: int
    replicates: list
    base: FitResult
    ci_level: float = 0.95
    seed: object = None
    failures: list = field(default_factory=list)


@dataclass
class IntervalTable:
    """Percentile intervals keyed by parameter name (arrays of equal shape)."""

    level: float
    lower: dict
    point: dict
    upper: dict

    def rows(self):
        """Long-format rows (parameter, index, lower, point, upper)."""
        out = []
        for name in self.lower:
            lo, pt, up = (np.asarray(d[name]) for d in (self.lower, self.point, self.upper))
            for idx in np.ndindex(lo.shape):
                out.append((name, ".".join(str(i) for i in idx) or "0",
                            float(lo[idx]), float(pt[idx]), float(up[idx])))
        return out


def align_to(rep: FitResult, base: FitResult) -> FitResult:
    """Flip components of ``rep`` so its weights point the same way as ``base``."""
    return align_signs(rep, base.U_hat, base.V_hat)


def align_signs(rep: FitResult, U_ref: np.ndarray, V_ref: np.ndarray) -> FitResult:
    """Flip components so that u_h'u_ref >= 0 and v_h'v_ref >= 0 for every h."""
    su = np.where(np.sum(rep.U_hat * U_ref, axis=0) < 0, -1.0, 1.0)
    sv = np.where(np.sum(rep.V_hat * V_ref, axis=0) < 0, -1.0, 1.0)
    if np.all(su == 1) and np.all(sv == 1):
        return rep
    b = rep.b_hat * su * sv
    V = rep.V_hat * sv
    coef = rep.f_coef
    if coef is not None:
        coef = coef.copy()
        d = rep.f_degree
        for h in range(rep.H):
            for k in range(1, d + 1):
                coef[1 + h * d + (k - 1)] *= su[h] ** k
    return replace(rep, U_hat=rep.U_hat * su, V_hat=V, xi_hat=rep.xi_hat * su,
                   omega_hat=rep.omega_hat * sv, b_hat=b, theta_hat=V * b,
                   eps_hat=rep.eps_hat * sv, P_hat=rep.P_hat * su, f_coef=coef)


def refit(fit: FitResult, data: Dataset) -> FitResult:
    cfg = fit.config
    if isinstance(cfg, FitConfig):
        return fit_pls(data, cfg)
    return fit_gflsr(data, cfg)


def bootstrap_dataset(fit: FitResult, idx: np.ndarray) -> Dataset:
    """Fitted structure plus the residual rows ``idx`` (resampled jointly)."""
    Xfit = fit.X0 - fit.X_resid
    Yfit = fit.Y0 - fit.Y_resid
    X = Xfit + fit.X_resid[idx] + fit.x_means
    Y = Yfit + fit.Y_resid[idx] + fit.y_means
    return Dataset.from_raw(X, Y)


def residual_bootstrap(fit: FitResult, B: int, seed=0, workers: int = 1,
                       ci_level: float = 0.95) -> BootstrapResult:
    """Residual bootstrap of a fit.

    Each replicate draws n row indices with replacement, adds the matching
    rows of (X_resid, Y_resid) to the fitted structure, refits with the base
    configuration and aligns signs to the base fit. Replicates use independent
    substreams of ``seed`` and are collected in index order.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    n = fit.n
    streams = np.random.SeedSequence(seed).spawn(B)

    def one(i):
        rng = np.random.default_rng(streams[i])
        idx = rng.integers(0, n, size=n)
        try:
            return align_to(refit(fit, bootstrap_dataset(fit, idx)), fit), None
        except (NumericalError, np.linalg.LinAlgError, ValueError) as err:
            return None, (i, str(err))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(B)))
    else:
        results = [one(i) for i in range(B)]
    reps = [r for r, _ in results if r is not None]
    fails = [e for _, e in results if e is not None]
    if len(fails) > MAX_FAIL_FRACTION * B:
        raise NumericalError(f"{len(fails)} of {B} bootstrap replicates failed",
                             diagnostics={"failures": fails})
    return BootstrapResult(B, reps, fit, ci_level, seed, fails)


def percentile_interval(values, level: float, axis: int = 0):
    """(lower, median, upper) percentile interval with linear interpolation."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    a = (1 - level) / 2
    v = np.asarray(values, dtype=float)
    lo, mid, up = np.quantile(v, [a, 0.5, 1 - a], axis=axis)
    return lo, mid, up


def intervals(boot: BootstrapResult, level: Optional[float] = None,
              assumption: Optional[str] = "B") -> IntervalTable:
    """Percentile intervals for U, V, b and (optionally) corrected estimates."""
    level = boot.ci_level if level is None else level
    if not boot.replicates:
        raise NumericalError("no successful replicates")
    stacks = {
        "U": np.stack([r.U_hat for r in boot.replicates]),
        "V": np.stack([r.V_hat for r in boot.replicates]),
        "b": np.stack([r.b_hat for r in boot.replicates]),
    }
    if assumption is not None:
        ce = [corrected_estimates(r, assumption) for r in boot.replicates]
        stacks["sigma_xi_sq"] = np.stack([c.sigma_xi_sq_corr for c in ce])
        stacks["b_corr"] = np.stack([c.b_corr for c in ce])
        stacks["sigma1_sq"] = np.array([c.sigma1_sq_corr for c in ce])
        if assumption == "B":
            stacks["sigma_x_sq"] = np.array([c.sigma_x_sq_corr for c in ce])
            stacks["sigma_y_sq"] = np.array([c.sigma_y_sq_corr for c in ce])
    lo, pt, up = {}, {}, {}
    for name, arr in stacks.items():
        lo[name], pt[name], up[name] = percentile_interval(arr, level)
    return IntervalTable(level, lo, pt, up)


def replicate_predictions(boot: BootstrapResult, X_new, noise_seed=None) -> tuple:
    """(mean predictions, predictions plus a residual row draw), each B x m x q."""
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    m = X_new.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(boot.seed if noise_seed is None else noise_seed)
                                .spawn(1)[0])
    means, draws = [], []
    for rep in boot.replicates:
        pred = predict(rep, X_new)
        rows = rng.integers(0, rep.n, size=m)
        means.append(pred)
        draws.append(pred + rep.Y_resid[rows])
    return np.stack(means), np.stack(draws)


def predict_interval(boot: BootstrapResult, X_new, level: Optional[float] = None, noise_seed=None):
    """Per-cell (lower, point, upper) prediction bands for new rows."""
    level = boot.ci_level if level is None else level
    _, draws = replicate_predictions(boot, X_new, noise_seed)
    return percentile_interval(draws, level)


def mean_interval(boot: BootstrapResult, X_new, level: Optional[float] = None):
    """Per-cell percentile band of the replicate mean predictions."""
    level = boot.ci_level if level is None else level
    means, _ = replicate_predictions(boot, X_new)
    return percentile_interval(means, level)
