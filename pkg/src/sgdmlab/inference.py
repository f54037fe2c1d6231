"""Plug-in asymptotic inference for averaged iterates.

The averaged estimate satisfies a central limit theorem with sandwich
covariance Sigma^{-1} Omega Sigma^{-1}, where Sigma is the Hessian at the
minimizer and Omega the normalized Gram matrix of per-sample gradients
there. This module builds that plug-in covariance, forms studentized
statistics, one-dimensional confidence intervals and the chi-square
confidence-region statistic, and provides the normal/chi-square quantile
and Kolmogorov-Smirnov machinery internally so the library needs no
external statistical dependency.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .problems import ProblemInstance

__all__ = [
    "CovarianceEstimate",
    "InferenceReport",
    "DegenerateDirectionError",
    "plug_in_covariance",
    "z_statistic",
    "confidence_interval",
    "confidence_region_statistic",
    "normal_cdf",
    "normal_quantile",
    "chi_square_quantile",
    "ks_normality",
]


# ---------------------------------------------------------------------------
# distribution helpers (internal implementations; accuracy ~1e-8 or better)

def normal_cdf(x):
    """Standard normal CDF via the complementary error function."""
    if np.isscalar(x):
        return 0.5 * math.erfc(-x / math.sqrt(2.0))
    arr = np.asarray(x, dtype=float)
    out = np.empty(arr.shape)
    flat, oflat = arr.ravel(), out.ravel()
    for i in range(flat.size):
        oflat[i] = 0.5 * math.erfc(-flat[i] / math.sqrt(2.0))
    return out


_ACK_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
          1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_ACK_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
          6.680131188771972e01, -1.328068155288572e01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
          -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
          3.754408661907416e00)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF: rational approximation plus a Newton
    polish against the erfc-based CDF (absolute error well below 1e-8)."""
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie in (0, 1)")
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    elif p <= 0.97575:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    for _ in range(2):
        err = normal_cdf(x) - p
        x -= err / (math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi))
    return x


def _gammp(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x): series for x < a+1,
    Lentz continued fraction for the complement otherwise."""
    if x < 0 or a <= 0:
        raise ValueError("require x >= 0 and a > 0")
    if x == 0.0:
        return 0.0
    lg = math.lgamma(a)
    if x < a + 1.0:
        ap = a
        term = total = 1.0 / a
        for _ in range(500):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        return total * math.exp(-x + a * math.log(x) - lg)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return 1.0 - math.exp(-x + a * math.log(x) - lg) * h


def chi_square_quantile(dof: int, upper_tail: float) -> float:
    """x with P(chi2_dof > x) = upper_tail, by inverting the regularized
    incomplete gamma (Wilson-Hilferty start, Newton with bisection guard)."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if not (0.0 < upper_tail < 1.0):
        raise ValueError("upper_tail must lie in (0, 1)")
    p = 1.0 - upper_tail
    k = float(dof)
    z = normal_quantile(p)
    x = k * (1.0 - 2.0 / (9.0 * k) + z * math.sqrt(2.0 / (9.0 * k))) ** 3
    x = max(x, 1e-8)
    lo, hi = 0.0, max(4.0 * x, k + 100.0)
    while _gammp(k / 2.0, hi / 2.0) < p:
        hi *= 2.0
    for _ in range(200):
        f = _gammp(k / 2.0, x / 2.0) - p
        if f > 0:
            hi = x
        else:
            lo = x
        dens = math.exp(
            (k / 2.0 - 1.0) * math.log(x) - x / 2.0 - (k / 2.0) * math.log(2.0)
            - math.lgamma(k / 2.0)
        )
        step = f / dens if dens > 0 else 0.0
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-12 * (1.0 + x):
            return x_new
        x = x_new
    return x


def ks_normality(samples) -> tuple[float, bool]:
    """One-sample Kolmogorov-Smirnov distance to N(0,1) and the 5% verdict
    (pass iff statistic < 1.358/sqrt(n), the asymptotic critical value)."""
    z = np.sort(np.asarray(samples, dtype=float))
    n = z.size
    if n < 100:
        raise ValueError("need at least 100 samples")
    cdf = normal_cdf(z)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    stat = float(max(d_plus, d_minus))
    return stat, stat < 1.358 / math.sqrt(n)


# ---------------------------------------------------------------------------
# plug-in covariance and studentized statistics

class DegenerateDirectionError(ValueError):
    pass


@dataclass
class CovarianceEstimate:
    """Hessian Sigma, normalized gradient Gram Omega, noise scale sigma2, and
    the sandwich Sigma^{-1} Omega Sigma^{-1}."""

    sigma_matrix: np.ndarray
    omega: np.ndarray
    sigma2: float
    sandwich: np.ndarray = field(init=False)

    def __post_init__(self):
        si = np.linalg.inv(self.sigma_matrix)
        sw = si @ self.omega @ si
        self.sandwich = 0.5 * (sw + sw.T)


def plug_in_covariance(problem: ProblemInstance, at: np.ndarray | None = None) -> CovarianceEstimate:
    """Plug-in covariance pieces.

    Default (at=None) evaluates everything at the known minimizer, matching
    the simulation protocol. Passing a point (e.g. the averaged iterate)
    switches to estimation mode for use when the minimizer is unknown; the
    Hessian and gradient Gram are then evaluated there instead.
    """
    if at is None:
        sigma = problem.hessian_at(problem.x_star)
        return CovarianceEstimate(sigma_matrix=sigma, omega=problem.omega,
                                  sigma2=problem.sigma2)
    at = np.asarray(at, dtype=float)
    sigma = problem.hessian_at(at)
    n = problem.n_samples
    grads = np.stack([problem.per_sample_gradient(at, i) for i in range(n)])
    sigma2 = float(np.mean(np.sum(grads * grads, axis=1)))
    omega = grads.T @ grads / (n * sigma2)
    return CovarianceEstimate(sigma_matrix=sigma, omega=omega, sigma2=sigma2)


def _direction_scale(omega_vec: np.ndarray, cov: CovarianceEstimate) -> float:
    omega_vec = np.asarray(omega_vec, dtype=float)
    if abs(np.linalg.norm(omega_vec) - 1.0) > 1e-12:
        raise ValueError("omega_vec must be a unit vector")
    q = float(omega_vec @ cov.sandwich @ omega_vec)
    if q <= 0.0:
        raise DegenerateDirectionError("sandwich quadratic form is not positive")
    return q


def z_statistic(xbar, x_star, omega_vec, cov: CovarianceEstimate,
                n: int, n0: int, B: int) -> float:
    """Studentized projection sqrt(B (n-n0)) w'(xbar - x*) / (sigma sqrt(w'Sw));
    asymptotically standard normal under the averaged CLT."""
    if n <= n0:
        raise ValueError("need n > n0")
    q = _direction_scale(omega_vec, cov)
    omega_vec = np.asarray(omega_vec, dtype=float)
    dev = float(omega_vec @ (np.asarray(xbar) - np.asarray(x_star)))
    return math.sqrt(B * (n - n0)) * dev / (math.sqrt(cov.sigma2) * math.sqrt(q))


def confidence_interval(xbar, omega_vec, cov: CovarianceEstimate,
                        n: int, n0: int, B: int, level: float = 0.95) -> tuple[float, float]:
    """Symmetric interval for w'x*: center w'xbar, half-width
    z_{(1-level)/2} sigma sqrt(w'Sw) / sqrt(B (n-n0))."""
    if n <= n0:
        raise ValueError("need n > n0")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    q = _direction_scale(omega_vec, cov)
    z = normal_quantile(1.0 - (1.0 - level) / 2.0)
    omega_vec = np.asarray(omega_vec, dtype=float)
    center = float(omega_vec @ np.asarray(xbar))
    half = z * math.sqrt(cov.sigma2) * math.sqrt(q) / math.sqrt(B * (n - n0))
    return center - half, center + half


def confidence_region_statistic(xbar, x_candidate, cov: CovarianceEstimate,
                                n: int, n0: int, B: int) -> float:
    """Ellipsoidal statistic B (n-n0) / sigma2 * d' Sigma Omega^{-1} Sigma d
    with d = xbar - x_candidate; compare against the chi-square upper
    quantile with d degrees of freedom. A near-singular Omega gets a ridge
    of 1e-10 trace/d (with a warning) before inversion; the one-dimensional
    statistics never invert Omega."""
    if n <= n0:
        raise ValueError("need n > n0")
    omega = cov.omega
    d = omega.shape[0]
    cond = np.linalg.cond(omega)
    if not np.isfinite(cond) or cond > 1e12:
        warnings.warn(
            "omega is near-singular; adding ridge 1e-10 trace/d before inversion",
            RuntimeWarning, stacklevel=2,
        )
        omega = omega + (1e-10 * np.trace(omega) / d) * np.eye(d)
    dev = np.asarray(xbar, dtype=float) - np.asarray(x_candidate, dtype=float)
    sd = cov.sigma_matrix @ dev
    try:
        w = np.linalg.solve(omega, sd)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "omega is singular even after ridge; supply a ridge-regularized omega"
        ) from exc
    return float(B * (n - n0) / cov.sigma2 * (sd @ w))


@dataclass
class InferenceReport:
    """Per-run inference summary: averaged point, sample sizes, studentized
    values and intervals per test direction, region statistic, and (when
    aggregated over replications) empirical coverage."""

    xbar: np.ndarray
    n: int
    n0: int
    B: int
    z_values: list[float]
    intervals: list[tuple[float, float]]
    region_statistic: float
    coverage: float | None = None

    def to_row(self) -> dict:
        row = {"n": self.n, "n0": self.n0, "B": self.B,
               "region_statistic": self.region_statistic}
        for i, (z, (lo, hi)) in enumerate(zip(self.z_values, self.intervals)):
            row[f"z_{i}"] = z
            row[f"lo_{i}"] = lo
            row[f"hi_{i}"] = hi
        if self.coverage is not None:
            row["coverage"] = self.coverage
        return row
