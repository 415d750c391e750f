"""Geometry of the fraction-defective surface p(mu, sigma).

For a normal characteristic with two-sided limits L < U, the fraction
defective is

    p(mu, sigma) = Phi((L - mu)/sigma) + Phi((mu - U)/sigma).

For a fixed level p the set {mu : p(mu, sigma) <= p} is a closed interval
[mu_lower, mu_upper] symmetric about mu0 = (L+U)/2, nonempty exactly when
sigma <= sigma0(p) = (L-U) / (2 Phi^-1(p/2)).  These endpoints sit inside the
innermost loop of every OC integral, so besides the exact root-finding
evaluator there is a memoized Chebyshev table (`MuUpperTable`) resolving
mu_upper(s, p) to ~1e-10 with a single polynomial evaluation.  The table is
built in the transformed variable u = sqrt(sigma0(p) - s), which absorbs the
square-root fold of the interval endpoints at s -> sigma0(p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from scipy.optimize import brentq

from .errors import EmptyAcceptanceRegionError
from .special import std_normal_cdf, std_normal_quantile

__all__ = [
    "SpecLimits",
    "ProcessPoint",
    "fraction_defective",
    "sigma0",
    "mu_upper",
    "mu_lower",
    "MuUpperTable",
    "mu_table",
]

# sigma this close to sigma0(p) is treated as the degenerate single-point
# interval; the interval half-width scales like sqrt(sigma0 - sigma), so the
# root-finding problem is ill-conditioned beyond this.
_DEGENERATE_REL = 1e-13


@dataclass(frozen=True)
class SpecLimits:
    """Lower/upper specification pair defining the quality region."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("specification limits must be finite")
        if not self.lower < self.upper:
            raise ValueError("lower limit must be strictly below upper limit")

    @property
    def mu0(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ProcessPoint:
    """A (mu, sigma) hypothesis about the production process."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError("process point must be finite")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")


def fraction_defective(pt: ProcessPoint, lim: SpecLimits) -> float:
    """Probability that a unit falls outside [L, U] under N(mu, sigma).

    Args:
        pt: process hypothesis.
        lim: specification limits.

    Returns:
        p(mu, sigma) in (0, 1).
    """
    return float(
        std_normal_cdf((lim.lower - pt.mu) / pt.sigma)
        + std_normal_cdf((pt.mu - lim.upper) / pt.sigma)
    )


def sigma0(p: float, lim: SpecLimits) -> float:
    """Largest sigma for which some mu attains fraction defective <= p.

    Args:
        p: fraction-defective level in (0, 1).
        lim: specification limits.

    Returns:
        sigma0(p) = (L - U) / (2 Phi^-1(p/2)) > 0.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return (lim.lower - lim.upper) / (2.0 * std_normal_quantile(0.5 * p))


def _frac_def_scalar(mu, sigma, lim):
    return (std_normal_cdf((lim.lower - mu) / sigma)
            + std_normal_cdf((mu - lim.upper) / sigma))


def mu_upper(sigma: float, p: float, lim: SpecLimits) -> float:
    """Right endpoint of the acceptance interval {mu : p(mu, sigma) <= p}.

    Solved by bracketed root-finding on g(mu) = p(mu, sigma) - p over
    [mu0, U + sigma*Phi^-1(p)]; g is strictly increasing there, g(mu0) <= 0
    because sigma <= sigma0(p), and at the right end the upper-tail term of
    p(mu, sigma) alone already reaches p.

    Args:
        sigma: process standard deviation, 0 < sigma <= sigma0(p).
        p: fraction-defective level in (0, 1).
        lim: specification limits.

    Returns:
        mu_upper(sigma, p) >= mu0, with p(mu_upper, sigma) = p to ~1e-12.

    Raises:
        EmptyAcceptanceRegionError: if sigma > sigma0(p).
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    s0 = sigma0(p, lim)
    if sigma > s0:
        raise EmptyAcceptanceRegionError(
            f"sigma={sigma!r} exceeds sigma0(p)={s0!r}: acceptance interval is empty"
        )
    if s0 - sigma < _DEGENERATE_REL * s0:
        return lim.mu0
    right = lim.upper + sigma * std_normal_quantile(p)
    if _frac_def_scalar(right, sigma, lim) - p <= 0.0:
        # lower-tail term underflowed; right end is the root to full precision
        return right
    return brentq(
        lambda m: _frac_def_scalar(m, sigma, lim) - p,
        lim.mu0,
        right,
        xtol=1e-14,
        rtol=1e-15,
    )


def mu_lower(sigma: float, p: float, lim: SpecLimits) -> float:
    """Left endpoint of the acceptance interval: L + U - mu_upper (reflection)."""
    return lim.lower + lim.upper - mu_upper(sigma, p, lim)


class MuUpperTable:
    """Chebyshev table for s -> mu_upper(s, p) on (0, sigma0(p)].

    The interpolation runs in u = sqrt(sigma0(p) - s) where the endpoint
    behavior is analytic.  Degree is doubled until the supremum error on a
    dense check grid drops below `accuracy` (default 1e-10).  Instances are
    immutable after construction and safe to share across threads.
    """

    def __init__(self, p: float, lim: SpecLimits, accuracy: float = 1e-10,
                 max_degree: int = 2048):
        self.p = p
        self.lim = lim
        self.accuracy = accuracy
        self.sigma0 = sigma0(p, lim)
        self._umax = math.sqrt(self.sigma0)

        def f(u):
            u = np.atleast_1d(u)
            out = np.empty(u.shape)
            for i, ui in enumerate(u):
                s = self.sigma0 - ui * ui
                if s <= 0.0:
                    # s -> 0 limit: the lower tail is gone entirely
                    out[i] = lim.upper + s * std_normal_quantile(p)
                else:
                    out[i] = mu_upper(s, p, lim)
            return out

        deg = 64
        while True:
            series = _cheb.Chebyshev.interpolate(f, deg, domain=[0.0, self._umax])
            uu = np.linspace(0.0, self._umax, 6 * deg + 17)
            err = float(np.max(np.abs(series(uu) - f(uu))))
            if err <= accuracy or deg >= max_degree:
                break
            deg *= 2
        self.degree = deg
        self.max_error = err
        self._coef = series.coef
        # affine map of [0, umax] onto Chebyshev's native [-1, 1]
        self._scale = 2.0 / self._umax

    def mu_of_s(self, s):
        """Vectorized mu_upper(s, p); s may round slightly past the domain ends."""
        u = np.sqrt(np.maximum(self.sigma0 - np.asarray(s, dtype=float), 0.0))
        return self.mu_of_u(u)

    def mu_of_u(self, u):
        """Evaluate at u = sqrt(sigma0(p) - s) directly (the integrators' variable)."""
        x = np.minimum(np.asarray(u, dtype=float), self._umax) * self._scale - 1.0
        return _cheb.chebval(x, self._coef)


@lru_cache(maxsize=128)
def _mu_table_cached(p: float, lower: float, upper: float, accuracy: float) -> MuUpperTable:
    return MuUpperTable(p, SpecLimits(lower, upper), accuracy)


def mu_table(p: float, lim: SpecLimits, accuracy: float = 1e-10) -> MuUpperTable:
    """Memoized `MuUpperTable` for the (p, lim, accuracy) triple."""
    return _mu_table_cached(p, lim.lower, lim.upper, accuracy)
