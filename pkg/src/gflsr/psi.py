"""Latent coupling curves and empirical dependence measures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite_e
from scipy.special import erfc as _erfc
from scipy.stats import rankdata

# Acklam's rational approximation to the normal quantile
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(t: np.ndarray) -> np.ndarray:
    x = np.empty_like(t)
    lo = t < _P_LOW
    hi = t > 1 - _P_LOW
    mid = ~(lo | hi)
    if np.any(lo):
        r = np.sqrt(-2 * np.log(t[lo]))
        x[lo] = (((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / \
            ((((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1)
    if np.any(hi):
        r = np.sqrt(-2 * np.log1p(-t[hi]))
        x[hi] = -(((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / \
            ((((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1)
    if np.any(mid):
        s = t[mid] - 0.5
        r = s * s
        x[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * s / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1)
    return x


def norm_ppf(t):
    """Standard normal quantile.

    Rational approximation (relative error about 1e-9) followed by one Halley
    step against the complementary error function, which brings it to near machine precision.
    """
    t = np.asarray(t, dtype=float)
    if np.any((t <= 0) | (t >= 1)) or np.any(~np.isfinite(t)):
        raise ValueError("quantile singularity: t must lie in (0, 1)")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    x = _acklam(t)
    # lower tail from erfc avoids cancellation; upper tail by symmetry
    tail = np.where(x <= 0, t, 1 - t)
    cdf_tail = 0.5 * _erfc(np.abs(x) / math.sqrt(2))
    e = np.where(x <= 0, cdf_tail - tail, tail - cdf_tail)
    u = e * math.sqrt(2 * math.pi) * np.exp(0.5 * x * x)
    x = x - u / (1 + 0.5 * x * u)
    return float(x[0]) if scalar else x


@dataclass(frozen=True)
class PsiFamily:
    """A coupling curve Psi: (0, 1) -> R.

    kind is one of ``hermite`` (normalized He_order of the normal quantile),
    ``normal`` (the quantile itself), ``exp_normal`` (exp of the quantile) and
    ``poly_normal`` (polynomial in the quantile, coefficients low to high).
    """

    kind: str = "normal"
    order: int = 1
    coeffs: tuple = ()

    @classmethod
    def hermite(cls, order: int) -> "PsiFamily":
        if order < 0:
            raise ValueError("order must be >= 0")
        return cls("hermite", order=order)

    @classmethod
    def normal(cls) -> "PsiFamily":
        return cls("normal")

    @classmethod
    def exp_normal(cls) -> "PsiFamily":
        return cls("exp_normal")

    @classmethod
    def poly_normal(cls, coeffs) -> "PsiFamily":
        return cls("poly_normal", coeffs=tuple(float(c) for c in coeffs))

    def of_z(self, z):
        """Evaluate the curve at a standard-normal value ``z``."""
        z = np.asarray(z, dtype=float)
        if self.kind == "normal":
            return z
        if self.kind == "hermite":
            c = np.zeros(self.order + 1)
            c[-1] = 1.0 / math.sqrt(math.factorial(self.order))
            return hermite_e.hermeval(z, c)
        if self.kind == "exp_normal":
            return np.exp(z)
        if self.kind == "poly_normal":
            return np.polynomial.polynomial.polyval(z, self.coeffs)
        raise ValueError(f"unknown Psi family {self.kind!r}")


def psi_eval(family: PsiFamily, t):
    """Psi(t) for t in (0, 1); raises on t in {0, 1}."""
    return family.of_z(norm_ppf(t))


def midpoint_moment(f, m: int = 10_000, eps: float = 1e-7) -> float:
    """Midpoint rule for the integral of f over (eps, 1 - eps).

    Coarse in the tails when f grows like a power of the normal quantile;
    ``normal_moment`` is the accurate choice for such integrands.
    """
    h = (1 - 2 * eps) / m
    t = eps + h * (np.arange(m) + 0.5)
    return float(np.sum(f(t)) * h)


def normal_moment(f, m: int = 10_000, zmax: float = 8.0) -> float:
    """Integral of f over (0, 1) after the substitution t = Phi(z).

    Midpoint rule for f(Phi(z)) phi(z) on [-zmax, zmax]; spectrally accurate
    when f is a polynomial in the normal quantile.
    """
    h = 2 * zmax / m
    z = -zmax + h * (np.arange(m) + 0.5)
    t = 0.5 * _erfc(-z / math.sqrt(2))
    w = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return float(np.sum(f(t) * w) * h)


MEASURES = ("covariance", "pearson", "spearman")


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(xc @ xc)
    sy = np.sqrt(yc @ yc)
    if sx == 0 or sy == 0:
        raise ValueError("zero variance")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


def dependence(measure: str, x, y) -> float:
    """Empirical dependence between two samples.

    covariance uses the 1/n divisor; spearman is pearson on average ranks.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    if x.size < 2:
        raise ValueError("need at least two observations")
    measure = measure.lower()
    if measure == "covariance":
        return float(np.mean((x - x.mean()) * (y - y.mean())))
    if measure == "pearson":
        return _pearson(x, y)
    if measure == "spearman":
        return _pearson(rankdata(x), rankdata(y))
    raise ValueError(f"unknown dependence measure {measure!r}")
