"""Component-wise estimation: singular pairs, deflation, slopes and prediction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, FitResult, NumericalError, as_rng, canonical_sign_factor
from .psi import dependence

VARIANTS = ("PLS_R", "PLS_SVD")
DEFLATIONS = ("weights", "scores")
RANK_TOL = 1e-12


@dataclass(frozen=True)
class FitConfig:
    """Settings for ``fit_pls``.

    deflation "weights" removes xi_h u_h' from X (the generative recursion);
    "scores" removes the least-squares projection on xi_h, which makes the
    score vectors mutually orthogonal (classical NIPALS PLS).
    """

    H: int
    variant: str = "PLS_R"
    svd_tol: float = 1e-12
    max_iter: int = 10_000
    deflation: str = "weights"

    def __post_init__(self):
        if self.H < 1:
            raise ValueError("H must be >= 1")
        if self.svd_tol <= 0:
            raise ValueError("svd_tol must be > 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.deflation not in DEFLATIONS:
            raise ValueError(f"deflation must be one of {DEFLATIONS}")


@dataclass(frozen=True)
class GflsrFitConfig:
    """Settings for ``fit_gflsr``.

    family "linear" uses stagewise slopes theta_h = b_h v_h; "poly" refits
    all responses on an intercept plus powers 1..max_degree of every score
    found so far. optimizer "svd" is the closed-form covariance solution;
    "coordinate" is a derivative-free coordinate ascent with a halving step
    schedule and random restarts, usable with any dependence measure.
    """

    H: int
    measure: str = "covariance"
    family: str = "linear"
    max_degree: int = 1
    eta: float = 0.0
    optimizer: str = "svd"
    restarts: int = 4
    step0: float = 0.5
    step_min: float = 1e-7
    max_evals: int = 200_000
    svd_start: bool = True
    seed: int = 0
    svd_tol: float = 1e-12
    max_iter: int = 10_000

    def __post_init__(self):
        if self.H < 1:
            raise ValueError("H must be >= 1")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.family not in ("linear", "poly"):
            raise ValueError("family must be 'linear' or 'poly'")
        if not 1 <= self.max_degree <= 3:
            raise ValueError("max_degree must be in 1..3")
        if self.optimizer not in ("svd", "coordinate"):
            raise ValueError("optimizer must be 'svd' or 'coordinate'")
        if self.optimizer == "svd" and (self.measure != "covariance" or self.eta != 0):
            raise ValueError("closed-form SVD needs the covariance measure and eta = 0")


def leading_singular_pair(C, tol: float = 1e-12, max_iter: int = 10_000, fallback: bool = True):
    """Top singular triple (u, v, s) of ``C`` by alternating power iteration.

    Starts from the column of largest norm. Iterates until the singular value
    changes by less than ``tol`` (relative) and the error left in the left
    vector, extrapolated from the observed contraction rate, is below 1e-13
    (or the step reaches rounding level). On hitting ``max_iter`` it falls back to a full SVD, or raises
    when ``fallback`` is False. Both vectors are returned sign-canonical, so
    u'Cv equals +s or -s.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if not np.all(np.isfinite(C)):
        raise ValueError("non-finite entries")
    norms = np.linalg.norm(C, axis=0)
    if norms.max() == 0.0:
        raise NumericalError("no dependence signal")
    u = C[:, int(np.argmax(norms))] / norms.max()
    s = 0.0
    du = du_prev = np.inf
    floor = 8 * np.finfo(float).eps * np.sqrt(u.size)
    converged = False
    for it in range(max_iter):
        v = C.T @ u
        v /= np.linalg.norm(v)
        u_new = C @ v
        s_new = np.linalg.norm(u_new)
        u_new /= s_new
        du_prev, du = du, np.linalg.norm(u_new - u)
        # remaining error of a geometric sequence with observed contraction rate
        rate = du / du_prev if du_prev > 0 else 0.0
        remaining = du * rate / (1 - rate) if rate < 1 else np.inf
        done = abs(s_new - s) <= tol * max(s_new, 1.0) and (du <= floor or remaining <= 1e-13)
        u, s = u_new, s_new
        if done:
            converged = True
            break
    if not converged:
        if not fallback:
            raise NumericalError("singular pair did not converge",
                                 diagnostics={"iterations": max_iter, "s": s, "du": du})
        Uf, sv, Vtf = np.linalg.svd(C)
        u, v, s = Uf[:, 0], Vtf[0], sv[0]
    else:
        v = C.T @ u
        v /= np.linalg.norm(v)
    u = u * canonical_sign_factor(u)
    v = v * canonical_sign_factor(v)
    return u, v, float(s)


def _check_dims(data: Dataset, H: int, need_q: bool = True) -> None:
    if need_q and H > min(data.p, data.q, data.n - 1):
        raise ValueError(f"H={H} exceeds min(p, q, n-1)")
    if H > min(data.p, data.n - 1):
        raise ValueError(f"H={H} exceeds min(p, n-1)")


def _slope(omega: np.ndarray, xi: np.ndarray) -> float:
    den = xi @ xi
    if den == 0:
        raise NumericalError("zero score vector")
    return float(omega @ xi / den)


def fit_pls(data: Dataset, cfg: FitConfig) -> FitResult:
    """Generative PLS fit (PLS-R or PLS-SVD) on centered data."""
    _check_dims(data, cfg.H)
    X0, Y0 = data.X, data.Y
    n, p = X0.shape
    q = Y0.shape[1]
    H = cfg.H
    U = np.zeros((p, H))
    V = np.zeros((q, H))
    P = np.zeros((p, H))
    Xi = np.zeros((n, H))
    Om = np.zeros((n, H))
    b = np.zeros(H)
    Xh = X0.copy()
    Yh = Y0.copy()
    s_first = None
    for h in range(H):
        C = Xh.T @ Yh / n
        try:
            u, v, s = leading_singular_pair(C, cfg.svd_tol, cfg.max_iter)
        except NumericalError as err:
            if "no dependence" not in str(err):
                raise
            s = 0.0
        s_first = s if s_first is None else s_first
        if s < RANK_TOL * max(1.0, s_first):
            partial = _assemble(data, cfg, U[:, :h], V[:, :h], P[:, :h], Xi[:, :h], Om[:, :h],
                                b[:h], Xh, Yh)
            raise NumericalError("insufficient components", partial=partial)
        xi = Xh @ u
        om = Yh @ v
        b[h] = _slope(om, xi)
        U[:, h], V[:, h], Xi[:, h], Om[:, h] = u, v, xi, om
        if cfg.deflation == "weights":
            P[:, h] = u
        else:
            P[:, h] = Xh.T @ xi / (xi @ xi)
        Xh = Xh - np.outer(xi, P[:, h])
        if cfg.variant == "PLS_R":
            # cumulative form: Y_h = Y_0 - sum_l xi_l theta_l'
            Yh = Y0 - Xi[:, :h + 1] @ (V[:, :h + 1] * b[:h + 1]).T
        else:
            Yh = Yh - np.outer(om, v)
    return _assemble(data, cfg, U, V, P, Xi, Om, b, Xh, Yh)


def _assemble(data, cfg, U, V, P, Xi, Om, b, Xh, Yh, f_coef=None, f_degree=1) -> FitResult:
    variant = getattr(cfg, "variant", "PLS_R")
    return FitResult(variant=variant, U_hat=U, V_hat=V, xi_hat=Xi, omega_hat=Om, b_hat=b,
                     theta_hat=V * b, X_resid=Xh, Y_resid=Yh, eps_hat=Om - Xi * b,
                     x_means=data.x_means, y_means=data.y_means, P_hat=P, X0=data.X, Y0=data.Y,
                     config=cfg, f_coef=f_coef, f_degree=f_degree)


def poly_design(Xi: np.ndarray, degree: int) -> np.ndarray:
    """Intercept plus powers 1..degree of every score column."""
    cols = [np.ones(Xi.shape[0])]
    for h in range(Xi.shape[1]):
        for k in range(1, degree + 1):
            cols.append(Xi[:, h] ** k)
    return np.column_stack(cols)


def _unit(x: np.ndarray) -> Optional[np.ndarray]:
    nrm = np.linalg.norm(x)
    return None if nrm == 0 or not np.isfinite(nrm) else x / nrm


def _coordinate_ascent(obj, x0: np.ndarray, step0: float, step_min: float, max_evals: int):
    """Maximize ``obj`` by signed coordinate steps with a halving schedule."""
    x = x0.copy()
    f = obj(x)
    step = step0
    evals = 1
    while step >= step_min and evals < max_evals:
        improved = False
        for i in range(x.size):
            for d in (step, -step):
                y = x.copy()
                y[i] += d
                fy = obj(y)
                evals += 1
                if fy > f:
                    x, f, improved = y, fy, True
                    break
        if not improved:
            step *= 0.5
    return x, f, evals


def _search_pair(Xh, Yh, Q, cfg: GflsrFitConfig, rng, trace: list):
    """Maximize D(Xh u, Yh v) + eta u' S u over u = Q a / |a|, v = c / |c|."""
    n = Xh.shape[0]
    k = Q.shape[1]
    S = Xh.T @ Xh / n
    XQ = Xh @ Q

    def obj(z):
        a = _unit(z[:k])
        c = _unit(z[k:])
        if a is None or c is None:
            return -np.inf
        x = XQ @ a
        y = Yh @ c
        try:
            d = dependence(cfg.measure, x, y)
        except ValueError:
            return -np.inf
        if cfg.eta:
            u = Q @ a
            d += cfg.eta * float(u @ S @ u)
        return d

    starts = []
    if cfg.svd_start:
        u0, v0, _ = leading_singular_pair(XQ.T @ Yh / n)
        starts.append(np.concatenate([u0, v0]))
    for _ in range(cfg.restarts):
        starts.append(rng.standard_normal(k + Yh.shape[1]))
    best = None
    for z0 in starts:
        z, f, evals = _coordinate_ascent(obj, z0, cfg.step0, cfg.step_min, cfg.max_evals)
        trace.append(f)
        if np.isfinite(f) and (best is None or f > best[1]):
            best = (z, f)
    if best is None:
        raise NumericalError("optimizer stagnation", diagnostics={"objective_trace": list(trace)})
    z = best[0]
    return Q @ _unit(z[:k]), _unit(z[k:])


def fit_gflsr(data: Dataset, cfg: GflsrFitConfig) -> FitResult:
    """Flexible latent structure fit with a chosen dependence measure.

    Each weight u_h is searched in the orthogonal complement of the earlier
    weights, X is deflated by xi_h u_h', and Y is deflated by the response
    map refitted on all scores found so far. Y weights need not be
    orthogonal, so H may exceed q.
    """
    _check_dims(data, cfg.H, need_q=False)
    X0, Y0 = data.X, data.Y
    n, p = X0.shape
    q = Y0.shape[1]
    H = cfg.H
    if cfg.optimizer == "coordinate" and max(p, q) > 8:
        raise ValueError("coordinate ascent is limited to p, q <= 8")
    rng = as_rng(cfg.seed)
    U = np.zeros((p, H))
    V = np.zeros((q, H))
    Xi = np.zeros((n, H))
    Om = np.zeros((n, H))
    b = np.zeros(H)
    Xh = X0.copy()
    Yh = Y0.copy()
    coef = None
    degree = cfg.max_degree if cfg.family == "poly" else 1
    trace: list = []
    for h in range(H):
        if cfg.optimizer == "svd":
            u, v, s = leading_singular_pair(Xh.T @ Yh / n, cfg.svd_tol, cfg.max_iter)
        else:
            # orthonormal basis of the complement of the previous weights
            Qf, _ = np.linalg.qr(np.column_stack([U[:, :h], np.eye(p)]))
            u, v = _search_pair(Xh, Yh, Qf[:, h:p], cfg, rng, trace)
            u = u * canonical_sign_factor(u)
            v = v * canonical_sign_factor(v)
        xi = Xh @ u
        om = Yh @ v
        b[h] = _slope(om, xi)
        U[:, h], V[:, h], Xi[:, h], Om[:, h] = u, v, xi, om
        Xh = Xh - np.outer(xi, u)
        if cfg.family == "linear":
            Yh = Y0 - Xi[:, :h + 1] @ (V[:, :h + 1] * b[:h + 1]).T
        else:
            D = poly_design(Xi[:, :h + 1], degree)
            coef = np.linalg.lstsq(D, Y0, rcond=None)[0]
            Yh = Y0 - D @ coef
    return _assemble(data, cfg, U, V, U.copy(), Xi, Om, b, Xh, Yh,
                     f_coef=coef, f_degree=degree)


def project_scores(fit: FitResult, X_new) -> np.ndarray:
    """Scores of new rows by the fitted deflation recursion."""
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if X_new.shape[1] != fit.U_hat.shape[0]:
        raise ValueError(f"X_new has {X_new.shape[1]} columns, expected {fit.U_hat.shape[0]}")
    if not np.all(np.isfinite(X_new)):
        raise ValueError("non-finite entries")
    Xh = X_new - fit.x_means
    Xi = np.zeros((Xh.shape[0], fit.H))
    for h in range(fit.H):
        Xi[:, h] = Xh @ fit.U_hat[:, h]
        Xh = Xh - np.outer(Xi[:, h], fit.P_hat[:, h])
    return Xi


def response_map(fit: FitResult, Xi: np.ndarray) -> np.ndarray:
    """Centered responses implied by scores ``Xi``."""
    if fit.f_coef is not None:
        return poly_design(Xi, fit.f_degree) @ fit.f_coef
    return Xi @ fit.theta_hat.T


def predict(fit: FitResult, X_new) -> np.ndarray:
    """Predicted responses (uncentered) for new predictor rows."""
    return response_map(fit, project_scores(fit, X_new)) + fit.y_means


def loading_distance(u_hat, w_true, kind: str = "root") -> float:
    """Sign-invariant distance between an estimated and a true weight vector.

    kind "root": min_s (1/p) sqrt(sum (s u - w)^2).
    kind "mean_sq": min_s (1/p) sum (s u - w)^2.
    """
    u = np.asarray(u_hat, dtype=float).ravel()
    w = np.asarray(w_true, dtype=float).ravel()
    if u.shape != w.shape:
        raise ValueError("length mismatch")
    p = u.size
    ss = min(np.sum((u - w) ** 2), np.sum((u + w) ** 2))
    if kind == "root":
        return float(np.sqrt(ss) / p)
    if kind == "mean_sq":
        return float(ss / p)
    raise ValueError(f"unknown distance kind {kind!r}")
