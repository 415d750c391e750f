"""Double sampling plan with pooled second stage: OC, ASN, band extremes.

The plan (n1, k1, k2; n2, k3) accepts on the first sample when
p*_1 = p(Xbar_1, S_1) <= k1, rejects when p*_1 > k2, and otherwise draws a
second sample and accepts when the pooled estimate p*_p = p(Xgrand, S) <= k3.

The acceptance probability decomposes as

    L(mu, sigma) = L_(n1,k1)(mu, sigma) + P(A2u) - P(A2l),

where P(A2u) = P(p*_p <= k3, p*_1 <= k2) and P(A2l) substitutes k1 for k2.
In the standardized variables Y_i = sqrt(n_i)(Xbar_i - mu)/sigma and
W_i = (n_i - 1) S_i^2 / sigma^2 the pooled standard deviation has the closed
form implemented by `pooled_sd`, and P(A2u) becomes the four-fold integral

    int_0^F int_{E1(w1)}^{E2(w1)} int int_0^{D(w1,y1,y2)}
        [Phi(C2) - Phi(C1)]  g_{n2-1}(w2) Phi'(y2) Phi'(y1) g_{n1-1}(w1)

with the nested bounds

    F  = (sigma0(k2)/sigma)^2 (n1 - 1)                (first stage passable)
    E1, E2 = standardized acceptance interval of Y1 at width-k2
    D  = (N-1)(sigma0(k3)/sigma)^2 - (sqrt(n2)y1 - sqrt(n1)y2)^2/N - w1
    C1, C2 = standardized pooled-mean interval at width-k3, N = n1 + n2.

This is evaluated by a tensor-product Gauss-Legendre rule after mapping each
nested interval onto the reference interval.  Wherever the integration range
ends at an acceptance-interval collapse (w1 at min(F, .), w2 at D) the
integrand vanishes like a square root and the affected dimension is
substituted u = sqrt(end - x) to restore polynomial behavior; chi-square and
normal directions are otherwise clipped at negligible-tail cutoffs.  The y2
range where D >= 0 is a closed-form interval, so no nodes are spent where the
inner integral is empty.

A note recorded by the verification suite: this integral reproduces the
published 10-digit OC tables for such plans, but it is *not* identical to a
direct simulation of the two-stage procedure; the conditional replacement of
the second-stage mean inside [Phi(C2) - Phi(C1)] ignores the correlation
between the first-sample mean and the pooled mean, which shifts the OC by
~1e-3 at typical process points.  `tests/` carries both an exact reduction
and a Monte-Carlo driver making the gap visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import QuadratureConvergenceError
from .isoline import MuUpperTable, ProcessPoint, SpecLimits, mu_table, mu_upper, sigma0
from .quadrature import (DEFAULT_CONFIG, QuadratureConfig, Z_CUT, chi2_cutoffs,
                         gauss_legendre, map_to)
from .single import BandExtreme, SinglePlan, _oc_single_table, _refine_extreme, band_sigma_grid
from .special import chi2_pdf, std_normal_cdf, std_normal_pdf

__all__ = [
    "DoublePlan",
    "A2Frame",
    "pooled_sd",
    "prob_a2_upper",
    "prob_a2_lower",
    "oc_double",
    "oc_double_checked",
    "asn_double",
    "asn_max",
    "band_extreme_double",
]


@dataclass(frozen=True)
class DoublePlan:
    """Two-stage plan (n1, k1, k2; n2, k3) with pooled second-stage estimate."""

    n1: int
    k1: float
    k2: float
    n2: int
    k3: float

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("double plan requires n1, n2 >= 2")
        for name in ("k1", "k2", "k3"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.k1 > self.k2:
            raise ValueError("double plan requires k1 <= k2")

    def first_stage(self, k: float) -> SinglePlan:
        return SinglePlan(self.n1, k)


def pooled_sd(w1: float, y1: float, y2: float, w2: float,
              n1: int, n2: int, sigma: float):
    """Pooled standard deviation from standardized first/second-sample statistics.

    S = sigma * sqrt((n1+n2)(w1+w2) + (sqrt(n2) y1 - sqrt(n1) y2)^2)
              / sqrt((n1+n2-1)(n1+n2)).

    Accepts scalars or broadcastable arrays; w1, w2 must be nonnegative.
    """
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if np.any(w1 < 0.0) or np.any(w2 < 0.0):
        raise ValueError("chi-square variates w1, w2 must be nonnegative")
    n = n1 + n2
    num = n * (w1 + w2) + (math.sqrt(n2) * np.asarray(y1) - math.sqrt(n1) * np.asarray(y2)) ** 2
    out = sigma * np.sqrt(num / ((n - 1) * n))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class A2Frame:
    """Integration-variable bundle (w1, y1, y2, w2) with its derived bounds.

    Mirrors one point of the 4-D integrand: the pooled deviation S, the
    pooled-mean interval [C1, C2], the w2 bound D, the y1 interval [E1, E2]
    and the w1 bound F, for a given plan/process point.  Used by tests and as
    the scalar reference for the vectorized integrator.
    """

    w1: float
    y1: float
    y2: float
    w2: float
    S: float
    C1: float
    C2: float
    D: float
    E1: float
    E2: float
    F: float

    @classmethod
    def build(cls, plan: DoublePlan, pt: ProcessPoint, lim: SpecLimits,
              w1: float, y1: float, y2: float, w2: float) -> "A2Frame":
        n1, n2 = plan.n1, plan.n2
        n = n1 + n2
        sig = pt.sigma
        s = float(pooled_sd(w1, y1, y2, w2, n1, n2, sig))
        s0k2 = sigma0(plan.k2, lim)
        s0k3 = sigma0(plan.k3, lim)
        F = (s0k2 / sig) ** 2 * (n1 - 1)
        D = ((n * (n - 1) * (s0k3 / sig) ** 2
              - (math.sqrt(n2) * y1 - math.sqrt(n1) * y2) ** 2) / n - w1)
        s1 = sig * math.sqrt(w1 / (n1 - 1)) if n1 > 1 else 0.0
        if s1 <= s0k2:
            m2 = mu_upper(s1, plan.k2, lim)
            E2 = math.sqrt(n1) / sig * (m2 - pt.mu)
            E1 = math.sqrt(n1) / sig * ((lim.lower + lim.upper - m2) - pt.mu)
        else:
            E1, E2 = math.inf, -math.inf
        if s <= s0k3:
            m3 = mu_upper(s, plan.k3, lim)
            C2 = (n * (m3 - pt.mu) - sig * math.sqrt(n1) * y1) / (sig * math.sqrt(n2))
            C1 = (n * ((lim.lower + lim.upper - m3) - pt.mu)
                  - sig * math.sqrt(n1) * y1) / (sig * math.sqrt(n2))
        else:
            C1, C2 = math.inf, -math.inf
        return cls(w1=w1, y1=y1, y2=y2, w2=w2, S=s, C1=C1, C2=C2,
                   D=D, E1=E1, E2=E2, F=F)


def _prob_a2(n1: int, n2: int, table_first: MuUpperTable, table3: MuUpperTable,
             mu: float, sigma: float, lim: SpecLimits, nodes: int) -> float:
    """Four-fold integral of H = Phi(C2) - Phi(C1) over the nested bounds.

    `table_first` carries the first-stage threshold (k2 for the upper event,
    k1 for the lower one); `table3` the pooled threshold k3.
    """
    r1, r2, n = n1 - 1, n2 - 1, n1 + n2
    F = r1 * (table_first.sigma0 / sigma) ** 2
    c3 = (n - 1) * (table3.sigma0 / sigma) ** 2
    t1_lo, t1_hi = chi2_cutoffs(r1)
    _, t2_hi = chi2_cutoffs(r2)
    w1_hi = min(F, c3, t1_hi)
    if w1_hi <= 0.0:
        return 0.0
    w1_lo = t1_lo if t1_lo < w1_hi else 0.0
    x, wt = gauss_legendre(nodes)
    sq1, sq2, sqn = math.sqrt(n1), math.sqrt(n2), math.sqrt(n)
    lsum = lim.lower + lim.upper
    s03 = table3.sigma0

    # dim 1 (w1): substitute u = sqrt(w1_hi - w1) when the range ends at an
    # acceptance collapse (F or c3) rather than at the chi-square tail cutoff
    if w1_hi < t1_hi:
        u, uw = map_to(0.0, math.sqrt(w1_hi - w1_lo), x, wt)
        w1n = w1_hi - u * u
        w1w = uw * 2.0 * u
    else:
        w1n, w1w = map_to(w1_lo, w1_hi, x, wt)
    w1w = w1w * chi2_pdf(w1n, r1)

    xx01 = 0.5 * (x + 1.0)  # reference nodes on [0, 1]
    total = 0.0
    for w1, w1weight in zip(w1n, w1w):
        if w1weight == 0.0 or w1 <= 0.0:
            continue
        s1 = sigma * math.sqrt(w1 / r1)
        m2 = float(table_first.mu_of_s(s1))
        e2 = sq1 * (m2 - mu) / sigma
        e1 = sq1 * ((lsum - m2) - mu) / sigma
        a1, b1 = max(e1, -Z_CUT), min(e2, Z_CUT)
        if b1 <= a1:
            continue
        y1n, y1w = map_to(a1, b1, x, wt)
        y1w = y1w * std_normal_pdf(y1n)

        # dim 3 (y2): D >= 0 is the closed-form band |sqrt(n2)y1 - sqrt(n1)y2| <= R
        R = math.sqrt(n * max(c3 - w1, 0.0))
        lo2 = np.maximum((sq2 * y1n - R) / sq1, -Z_CUT)
        hi2 = np.minimum((sq2 * y1n + R) / sq1, Z_CUT)
        width = np.maximum(hi2 - lo2, 0.0)
        y2n = 0.5 * width[:, None] * x[None, :] + 0.5 * (lo2 + hi2)[:, None]
        y2w = 0.5 * width[:, None] * wt[None, :] * std_normal_pdf(y2n)

        q = (sq2 * y1n[:, None] - sq1 * y2n) ** 2 / n
        D = np.maximum(c3 - w1 - q, 0.0)

        # dim 4 (w2) on [0, min(D, t2_hi)]: tau-substitution when the range
        # ends at the collapse D, plain affine map when clipped at the tail
        collapsed = D <= t2_hi
        tau_max = np.sqrt(D)
        tau = tau_max[..., None] * xx01
        w2_sub = np.maximum(D[..., None] - tau * tau, 0.0)
        wt_sub = wt[None, None, :] * tau_max[..., None] * tau
        w2_aff = np.broadcast_to(t2_hi * xx01, w2_sub.shape)
        wt_aff = np.broadcast_to(0.5 * t2_hi * wt, w2_sub.shape)
        w2n = np.where(collapsed[..., None], w2_sub, w2_aff)
        w2w = np.where(collapsed[..., None], wt_sub, wt_aff) * chi2_pdf(w2n, r2)

        ssq = (w1 + w2n + q[..., None]) / (n - 1)          # (S/sigma)^2
        S = sigma * np.sqrt(ssq)
        # u3 = sqrt(s03 - S) evaluated stably through the difference of squares
        u3 = np.sqrt(np.maximum(s03 * s03 - sigma * sigma * ssq, 0.0) / (s03 + S))
        m3 = table3.mu_of_u(u3)
        c_shift = sigma * sq1 * y1n[:, None, None]
        C2 = (n * (m3 - mu) - c_shift) / (sigma * sq2)
        C1 = (n * ((lsum - m3) - mu) - c_shift) / (sigma * sq2)
        H = std_normal_cdf(C2) - std_normal_cdf(C1)

        inner = (H * w2w).sum(axis=-1)
        mid = (inner * y2w).sum(axis=-1)
        total += w1weight * float(np.dot(mid, y1w))
    return min(max(total, 0.0), 1.0)


def _tables(plan: DoublePlan, lim: SpecLimits, cfg: QuadratureConfig):
    return (mu_table(plan.k1, lim, cfg.mu_table_accuracy),
            mu_table(plan.k2, lim, cfg.mu_table_accuracy),
            mu_table(plan.k3, lim, cfg.mu_table_accuracy))


def prob_a2_upper(plan: DoublePlan, pt: ProcessPoint, lim: SpecLimits,
                  cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """P(p*_p <= k3, p*_1 <= k2): acceptance through the wide first-stage gate."""
    _, t2, t3 = _tables(plan, lim, cfg)
    return _prob_a2(plan.n1, plan.n2, t2, t3, pt.mu, pt.sigma, lim, cfg.nodes_per_dim)


def prob_a2_lower(plan: DoublePlan, pt: ProcessPoint, lim: SpecLimits,
                  cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """P(p*_p <= k3, p*_1 <= k1): same integral with k1 in place of k2."""
    t1, _, t3 = _tables(plan, lim, cfg)
    return _prob_a2(plan.n1, plan.n2, t1, t3, pt.mu, pt.sigma, lim, cfg.nodes_per_dim)


def oc_double(plan: DoublePlan, pt: ProcessPoint, lim: SpecLimits,
              cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Operating characteristic of the double plan at a process point.

    L = L_(n1,k1) + P(A2u) - P(A2l); always within [L_(n1,k1), L_(n1,k2)].
    """
    t1, t2, t3 = _tables(plan, lim, cfg)
    first = _oc_single_table(plan.n1, t1, pt.mu, pt.sigma, lim, 48)
    a2u = _prob_a2(plan.n1, plan.n2, t2, t3, pt.mu, pt.sigma, lim, cfg.nodes_per_dim)
    a2l = _prob_a2(plan.n1, plan.n2, t1, t3, pt.mu, pt.sigma, lim, cfg.nodes_per_dim)
    return min(max(first + a2u - a2l, 0.0), 1.0)


def oc_double_checked(plan: DoublePlan, pt: ProcessPoint, lim: SpecLimits,
                      cfg: QuadratureConfig = DEFAULT_CONFIG):
    """OC plus a node-refinement error estimate (raises above cfg.abs_tol)."""
    v1 = oc_double(plan, pt, lim, cfg)
    finer = QuadratureConfig(nodes_per_dim=cfg.nodes_per_dim + cfg.nodes_per_dim // 2,
                             abs_tol=cfg.abs_tol,
                             mu_table_accuracy=cfg.mu_table_accuracy)
    v2 = oc_double(plan, pt, lim, finer)
    est = abs(v2 - v1)
    if est > cfg.abs_tol:
        raise QuadratureConvergenceError(
            f"double-plan OC did not converge: estimate {est:.3e} > {cfg.abs_tol:.3e}",
            est,
        )
    return v2, est


def asn_double(plan: DoublePlan, pt: ProcessPoint, lim: SpecLimits,
               cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Average sample number n1 + n2 * P(k1 < p*_1 <= k2).

    The continuation probability is a difference of two single-plan OCs, so
    this needs only one-dimensional integrals.
    """
    t1 = mu_table(plan.k1, lim, cfg.mu_table_accuracy)
    t2 = mu_table(plan.k2, lim, cfg.mu_table_accuracy)
    cont = (_oc_single_table(plan.n1, t2, pt.mu, pt.sigma, lim, 48)
            - _oc_single_table(plan.n1, t1, pt.mu, pt.sigma, lim, 48))
    return plan.n1 + plan.n2 * min(max(cont, 0.0), 1.0)


def asn_max(plan: DoublePlan, lim: SpecLimits,
            cfg: QuadratureConfig = DEFAULT_CONFIG,
            grid_points: int = 48) -> tuple[ProcessPoint, float]:
    """Global maximum of the ASN over process points.

    By the mu -> L+U-mu symmetry only mu >= mu0 is searched; sigma runs over
    a geometric grid capped at 4*sigma0(k2), beyond which the continuation
    probability is negligible.  The best grid cell is polished with
    Nelder-Mead in (mu, log sigma).

    Returns:
        (argmax process point, max ASN).
    """
    from scipy.optimize import minimize

    t1 = mu_table(plan.k1, lim, cfg.mu_table_accuracy)
    t2 = mu_table(plan.k2, lim, cfg.mu_table_accuracy)

    def asn_at(mu: float, s: float) -> float:
        cont = (_oc_single_table(plan.n1, t2, mu, s, lim, 48)
                - _oc_single_table(plan.n1, t1, mu, s, lim, 48))
        return plan.n1 + plan.n2 * min(max(cont, 0.0), 1.0)

    s0k2 = t2.sigma0
    mus = np.linspace(lim.mu0, lim.mu0 + 3.0 * lim.width, grid_points)
    sigmas = np.geomspace(s0k2 * 1e-3, 4.0 * s0k2, grid_points)
    best_v, best_mu, best_s = -math.inf, lim.mu0, s0k2
    for m in mus:
        for s in sigmas:
            v = asn_at(m, s)
            if v > best_v:
                best_v, best_mu, best_s = v, m, s
    res = minimize(lambda z: -asn_at(z[0], math.exp(z[1])),
                   [best_mu, math.log(best_s)], method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 400})
    if -res.fun > best_v:
        best_v = -res.fun
        best_mu, best_s = res.x[0], math.exp(res.x[1])
    return ProcessPoint(best_mu, best_s), float(best_v)


def band_extreme_double(plan: DoublePlan, p: float, mode: Literal["min", "max"],
                        lim: SpecLimits, cfg: QuadratureConfig = DEFAULT_CONFIG,
                        grid_points: int = 64) -> BandExtreme:
    """Extreme of the double-plan OC along the iso-p-line over sigma.

    Same grid-plus-polish strategy as the single-plan band extreme; each
    evaluation costs two 4-D quadratures.
    """
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    grid = band_sigma_grid(p, lim, grid_points)

    def value(s: float) -> float:
        m = mu_upper(s, p, lim)
        return oc_double(plan, ProcessPoint(m, s), lim, cfg)

    vals = np.array([value(s) for s in grid])
    sign = 1.0 if mode == "min" else -1.0
    return _refine_extreme(value, grid, vals, sign)
