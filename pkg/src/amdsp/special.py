"""Standard normal and chi-square primitives.

Every probability integral in this package reduces to the standard normal
distribution function, its inverse, and the chi-square density.  These
wrappers pin down the accuracy contract (absolute error below 1e-14 for the
normal CDF, quantile round-trip below 1e-12) and keep the chi-square density
in log space so that large degrees of freedom (plans with n > 100) neither
overflow nor lose the tails.

All functions accept scalars or numpy arrays and are pure; they can be called
concurrently from any number of threads.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sc

__all__ = [
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "chi2_pdf",
    "chi2_quantile",
]

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def std_normal_cdf(x):
    """Standard normal distribution function Phi(x).

    Computed as erfc(-x/sqrt(2))/2; the complementary error function is a
    correctly-rounded libm routine, so the absolute error stays below 1e-15
    everywhere and the far tails underflow gracefully instead of losing
    digits to cancellation.

    Args:
        x: point(s) of evaluation; must be finite.

    Returns:
        Phi(x) in [0, 1], scalar for scalar input.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("std_normal_cdf requires finite input")
    out = 0.5 * _sc.erfc(-x / _SQRT2)
    return float(out) if out.ndim == 0 else out


def std_normal_pdf(x):
    """Standard normal density Phi'(x)."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x - _LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def std_normal_quantile(p):
    """Inverse of the standard normal distribution function.

    The rational approximation behind scipy's ndtri is polished with one
    Newton step against std_normal_cdf, which brings the round-trip error
    Phi(Phi^-1(p)) - p to a few ulps for p away from the extreme tails.

    Args:
        p: probability strictly inside (0, 1).

    Returns:
        x with Phi(x) = p; scalar for scalar input.

    Raises:
        ValueError: if p is outside the open interval (0, 1).
    """
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise ValueError("std_normal_quantile requires 0 < p < 1")
    x = _sc.ndtri(p)
    pdf = std_normal_pdf(x)
    # Newton polish where the density has headroom; skip the far tails where
    # pdf underflows and ndtri is already as good as double precision allows.
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(pdf > 1e-300, (0.5 * _sc.erfc(-x / _SQRT2) - p) / pdf, 0.0)
    x = x - step
    return float(x) if x.ndim == 0 else x


def chi2_pdf(t, r):
    """Density g_r(t) of the chi-square distribution with r degrees of freedom.

    Evaluated as exp((r/2-1)*log t - t/2 - log(2^{r/2} Gamma(r/2))) so that
    r beyond 100 stays finite.  t < 0 is rejected; t = 0 returns the correct
    limit (0 for r > 2, 1/2 for r = 2, +inf for r = 1).

    Args:
        t: nonnegative point(s) of evaluation.
        r: degrees of freedom, r >= 1.

    Returns:
        g_r(t) >= 0, scalar for scalar input.
    """
    if r < 1:
        raise ValueError("degrees of freedom must be >= 1")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("chi2_pdf requires t >= 0")
    half = 0.5 * r
    norm = half * math.log(2.0) + _sc.gammaln(half)
    with np.errstate(divide="ignore", invalid="ignore"):
        logt = np.log(np.where(t > 0.0, t, 1.0))
        body = np.exp((half - 1.0) * logt - 0.5 * t - norm)
    if r == 2:
        zero_val = math.exp(-norm)
    elif r == 1:
        zero_val = math.inf
    else:
        zero_val = 0.0
    out = np.where(t > 0.0, body, zero_val)
    return float(out) if out.ndim == 0 else out


def chi2_quantile(q, r):
    """Quantile of the chi-square distribution, used for integration cutoffs.

    Args:
        q: probability in (0, 1).
        r: degrees of freedom.

    Returns:
        t with P(chi2_r <= t) = q.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("chi2_quantile requires 0 < q < 1")
    return float(2.0 * _sc.gammaincinv(0.5 * r, q))
