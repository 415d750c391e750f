"""Single sampling plan (n, k): operating characteristic and band extremes.

The lot is accepted when the plug-in estimate p* = p(Xbar, S) of the fraction
defective satisfies p* <= k.  With W = (n-1)S^2/sigma^2 chi-square and Xbar
normal, conditioning on W gives the OC as a single integral

    L_(n,k)(mu, sigma) = int_0^B  { Phi(sqrt(n)/sigma (mu(s(t), k) - mu))
                                  - Phi(sqrt(n)/sigma (mudot(s(t), k) - mu)) }
                         g_{n-1}(t) dt,

with s(t) = sigma*sqrt(t/(n-1)), mudot = L+U-mu(s,k), and upper limit
B = (n-1) (sigma0(k)/sigma)^2, beyond which the acceptance interval for the
sample mean is empty.  The integrand vanishes like sqrt(B - t) at t = B, so
the panel touching B is integrated in tau = sqrt(B - t).

Because sigma is unknown, the OC against the true fraction defective p is not
a curve but a band: along an iso-p-line the OC still varies with sigma.  Band
extremes are located on a sigma grid (geometric, plus extra points clustered
at the sigma0(p) end where the band folds) and polished with bounded
derivative-free minimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InfeasibleDesignError
from .isoline import MuUpperTable, SpecLimits, ProcessPoint, mu_table, mu_upper, sigma0
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, chi2_cutoffs, gauss_legendre, map_to
from .special import chi2_pdf, std_normal_cdf
from .errors import QuadratureConvergenceError

__all__ = [
    "SinglePlan",
    "DesignRequirement",
    "BandExtreme",
    "oc_single",
    "oc_single_checked",
    "oc_single_on_isoline",
    "band_extreme_single",
]


@dataclass(frozen=True)
class SinglePlan:
    """Sample size n and acceptance threshold k on the estimated fraction defective."""

    n: int
    k: float

    def __post_init__(self):
        if self.n <= 3:
            raise ValueError("single plan requires n > 3")
        if not 0.0 < self.k < 1.0:
            raise ValueError("threshold k must lie in (0, 1)")


@dataclass(frozen=True)
class DesignRequirement:
    """Two-point OC contract: OC >= 1-alpha at p1 and OC <= beta at p2."""

    p1: float
    p2: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("p1", "p2", "alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.p1 >= self.p2:
            raise InfeasibleDesignError(
                f"requirement needs p1 < p2, got p1={self.p1}, p2={self.p2}"
            )
        if 1.0 - self.alpha <= self.beta:
            raise InfeasibleDesignError(
                "requirement needs 1 - alpha > beta; the two-point condition is degenerate"
            )


@dataclass(frozen=True)
class BandExtreme:
    """Extreme OC value over an iso-p-line, with the sigma attaining it."""

    sigma_star: float
    value: float


def _oc_single_table(n: int, table: MuUpperTable, mu: float, sigma: float,
                     lim: SpecLimits, nodes: int) -> float:
    """Theorem-1 integral with mu(s, k) supplied by a Chebyshev table."""
    r = n - 1
    s0k = table.sigma0
    B = r * (s0k / sigma) ** 2
    t_lo, t_hi = chi2_cutoffs(r)
    hi = min(B, t_hi)
    if hi <= 0.0:
        return 0.0
    lo = t_lo if t_lo < hi else 0.0
    x, w = gauss_legendre(nodes)
    sqrt_n = math.sqrt(n)

    def body(t):
        s = sigma * np.sqrt(t / r)
        mk = table.mu_of_s(s)
        up = std_normal_cdf(sqrt_n / sigma * (mk - mu))
        dn = std_normal_cdf(sqrt_n / sigma * ((lim.lower + lim.upper - mk) - mu))
        return (up - dn) * chi2_pdf(t, r)

    total = 0.0
    if B <= t_hi:
        # last panel reaches the collapse point: substitute t = B - tau^2
        cut = max(lo, hi - min(hi - lo, 4.0 * math.sqrt(2.0 * r) + 8.0))
        for a, b in _plain_panels(lo, cut, r):
            tn, tw = map_to(a, b, x, w)
            total += float(np.dot(body(tn), tw))
        tau, tauw = map_to(0.0, math.sqrt(hi - cut), x, w)
        total += float(np.dot(body(hi - tau * tau) * 2.0 * tau, tauw))
    else:
        for a, b in _plain_panels(lo, hi, r):
            tn, tw = map_to(a, b, x, w)
            total += float(np.dot(body(tn), tw))
    return min(max(total, 0.0), 1.0)


def _plain_panels(lo: float, hi: float, r: int):
    """Split [lo, hi] at the chi-square mode when it falls inside."""
    if hi <= lo:
        return []
    mode = max(float(r - 2), 1.0)
    if lo + 1e-9 < mode < hi - 1e-9:
        return [(lo, mode), (mode, hi)]
    return [(lo, hi)]


def oc_single(plan: SinglePlan, pt: ProcessPoint, lim: SpecLimits,
              cfg: QuadratureConfig = DEFAULT_CONFIG, nodes: int = 48) -> float:
    """Operating characteristic P(p* <= k) of the single plan at (mu, sigma).

    Args:
        plan: the (n, k) plan.
        pt: process point.
        lim: specification limits.
        cfg: quadrature configuration (mu-table accuracy).
        nodes: Gauss-Legendre nodes per panel.

    Returns:
        Acceptance probability in [0, 1].
    """
    table = mu_table(plan.k, lim, cfg.mu_table_accuracy)
    return _oc_single_table(plan.n, table, pt.mu, pt.sigma, lim, nodes)


def oc_single_checked(plan: SinglePlan, pt: ProcessPoint, lim: SpecLimits,
                      cfg: QuadratureConfig = DEFAULT_CONFIG, nodes: int = 48):
    """OC with a refinement error estimate; raises when it exceeds cfg.abs_tol.

    Returns:
        (value, error_estimate) where the estimate is the change under a
        ~1.5x node refinement.
    """
    table = mu_table(plan.k, lim, cfg.mu_table_accuracy)
    v1 = _oc_single_table(plan.n, table, pt.mu, pt.sigma, lim, nodes)
    v2 = _oc_single_table(plan.n, table, pt.mu, pt.sigma, lim, nodes + nodes // 2)
    est = abs(v2 - v1)
    if est > cfg.abs_tol:
        raise QuadratureConvergenceError(
            f"single-plan OC did not converge: estimate {est:.3e} > {cfg.abs_tol:.3e}",
            est,
        )
    return v2, est


def oc_single_on_isoline(plan: SinglePlan, p: float, sigma: float, lim: SpecLimits,
                         cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """OC at the iso-p-line point (mu_upper(sigma, p), sigma).

    The value at mu_lower(sigma, p) is identical by the reflection symmetry
    mu -> L+U-mu of the OC.
    """
    m = mu_upper(sigma, p, lim)
    return oc_single(plan, ProcessPoint(m, sigma), lim, cfg)


def band_sigma_grid(p: float, lim: SpecLimits, num: int = 64) -> np.ndarray:
    """sigma grid over (sigma0(p)*1e-3, sigma0(p)] used for band extremization.

    Geometric in sigma, augmented with points clustered at the sigma0 end
    where the acceptance interval folds and the OC moves fastest.
    """
    s0 = sigma0(p, lim)
    base = np.geomspace(s0 * 1e-3, s0, num)
    near = s0 * (1.0 - np.geomspace(1e-5, 0.25, max(num // 6, 8)))
    return np.unique(np.concatenate([base, near, [s0]]))


def band_extreme_single(plan: SinglePlan, p: float, mode: Literal["min", "max"],
                        lim: SpecLimits, cfg: QuadratureConfig = DEFAULT_CONFIG,
                        grid_points: int = 64) -> BandExtreme:
    """Extreme of the single-plan OC along the iso-p-line over sigma.

    Args:
        plan: the (n, k) plan.
        p: fraction-defective level of the iso-p-line.
        mode: "min" or "max".
        lim: specification limits.
        cfg: quadrature configuration.
        grid_points: size of the coarse sigma grid.

    Returns:
        BandExtreme with the extremal OC and the sigma attaining it.
    """
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    table = mu_table(plan.k, lim, cfg.mu_table_accuracy)
    grid = band_sigma_grid(p, lim, grid_points)

    def value(s: float) -> float:
        m = mu_upper(s, p, lim)
        return _oc_single_table(plan.n, table, m, s, lim, 48)

    vals = np.array([value(s) for s in grid])
    sign = 1.0 if mode == "min" else -1.0
    return _refine_extreme(value, grid, vals, sign)


def _refine_extreme(value, grid, vals, sign) -> BandExtreme:
    """Bounded derivative-free polish around the best coarse-grid cell."""
    from scipy.optimize import minimize_scalar

    i = int(np.argmin(sign * vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    best_s, best_v = float(grid[i]), float(vals[i])
    if hi > lo:
        res = minimize_scalar(lambda s: sign * value(s), bounds=(lo, hi),
                              method="bounded", options={"xatol": grid[-1] * 1e-7})
        if res.fun < sign * best_v:
            best_s, best_v = float(res.x), float(sign * res.fun)
    return BandExtreme(sigma_star=best_s, value=best_v)
