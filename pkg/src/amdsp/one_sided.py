"""Plans with an upper tolerance limit only: the design engine's inner model.

With a single (upper) specification limit the fraction defective is
p = Phi((mu - U)/sigma), the acceptance interval for the sample mean never
becomes empty, and the OC is a genuine function of p rather than a band.
Plans are parameterized by acceptance numbers l on the t-statistic scale;
their two-sided counterparts use thresholds k~ = Phi(l/sqrt(n)) on the
estimated fraction defective (`translate_to_two_sided`).

Single plan (n, l): accept when p* = Phi((Xbar - U)/S) <= Phi(l/sqrt(n)).
Conditioning on W = (n-1)S^2/sigma^2 reduces the OC at fraction defective p
to the one-dimensional integral

    OC(p) = int  Phi(sqrt(n) delta + l sqrt(w/(n-1)))  g_{n-1}(w) dw,

with delta = -Phi^-1(p).

Double plan (n1, l1, l2; n2, l3): the second stage pools both samples.  In
the rotated coordinates

    T = (sqrt(n1) Y1 + sqrt(n2) Y2)/sqrt(N)   (drives the grand mean)
    V = (sqrt(n2) Y1 - sqrt(n1) Y2)/sqrt(N)   (drives the pooled spread)

T and V are independent standard normals, S^2 = sigma^2 (W1 + W2 + V^2)/(N-1)
is free of T, and both acceptance events become half-lines in T, so the inner
T-integral is a closed-form normal mass and the acceptance probability is a
three-dimensional integral over (w1, v, w2).  This reduction is exact: it
reproduces direct simulation of the two-stage procedure to Monte-Carlo
accuracy (see tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import Z_CUT, chi2_cutoffs, gauss_legendre, map_to
from .special import chi2_pdf, std_normal_cdf, std_normal_pdf, std_normal_quantile

__all__ = [
    "OneSidedDoublePlan",
    "oc_one_sided_single",
    "oc_one_sided_double",
    "one_sided_asn",
    "one_sided_asn_max",
    "translate_to_two_sided",
    "translate_from_two_sided",
]


@dataclass(frozen=True)
class OneSidedDoublePlan:
    """Upper-limit double plan (n1, l1, l2; n2, l3) on the t-statistic scale."""

    n1: int
    l1: float
    l2: float
    n2: int
    l3: float

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("double plan requires n1, n2 >= 2")
        if self.l1 > self.l2:
            raise ValueError("double plan requires l1 <= l2")


def oc_one_sided_single(n: int, l: float, p: float, nodes: int = 48) -> float:
    """Acceptance probability of the one-sided single plan (n, l) at fraction defective p.

    Args:
        n: sample size (n > 1).
        l: acceptance number; the threshold on p* is Phi(l/sqrt(n)).
        p: true fraction defective in (0, 1).

    Returns:
        OC value in [0, 1]; a function of p alone by scale-location invariance.
    """
    if n < 2:
        raise ValueError("one-sided single plan requires n >= 2")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    r = n - 1
    delta = -std_normal_quantile(p)
    lo, hi = chi2_cutoffs(r)
    x, wt = gauss_legendre(nodes)
    total = 0.0
    mode = max(float(r - 2), 1.0)
    panels = [(lo, mode), (mode, hi)] if lo < mode < hi else [(lo, hi)]
    for a, b in panels:
        w, ww = map_to(a, b, x, wt)
        body = std_normal_cdf(math.sqrt(n) * delta + l * np.sqrt(w / r)) * chi2_pdf(w, r)
        total += float(np.dot(body, ww))
    return min(max(total, 0.0), 1.0)


def _a2_one_sided(n1: int, n2: int, l_first: float, l3: float, delta: float,
                  nodes: int) -> float:
    """P(pooled accept and first-stage p* <= Phi(l_first/sqrt(n1))), one-sided.

    Integral over (w1, v, w2) of the normal mass of
    T <= min(tE(w1, v), b(S(w1, v, w2))) where tE caps the first-stage event
    and b the pooled event.
    """
    r1, r2, n = n1 - 1, n2 - 1, n1 + n2
    z1 = l_first / math.sqrt(n1)        # Phi^-1 of the first-stage threshold
    z3 = l3 / math.sqrt(n)
    lo1, hi1 = chi2_cutoffs(r1)
    lo2, hi2 = chi2_cutoffs(r2)
    x, wt = gauss_legendre(nodes)
    sq1, sq2, sqn = math.sqrt(n1), math.sqrt(n2), math.sqrt(n)

    w1n, w1w = map_to(lo1, hi1, x, wt)
    w1w = w1w * chi2_pdf(w1n, r1)
    vn, vw = map_to(-Z_CUT, Z_CUT, x, wt)
    vw = vw * std_normal_pdf(vn)
    w2n, w2w = map_to(lo2, hi2, x, wt)
    w2w = w2w * chi2_pdf(w2n, r2)

    W1 = w1n[:, None, None]
    V = vn[None, :, None]
    W2 = w2n[None, None, :]
    ebar = sq1 * (delta + z1 * np.sqrt(W1 / r1))              # Y1 bound
    t_first = (sqn * ebar - sq2 * V) / sq1                    # as a T bound
    s_over_sigma = np.sqrt((W1 + W2 + V * V) / (n - 1))
    t_pooled = sqn * (delta + z3 * s_over_sigma)
    mass = std_normal_cdf(np.minimum(t_first, t_pooled))
    return float(np.einsum("a,b,c,abc->", w1w, vw, w2w, mass))


def oc_one_sided_double(plan: OneSidedDoublePlan, p: float, nodes: int = 32) -> float:
    """Acceptance probability of the one-sided pooled double plan at fraction defective p.

    Args:
        plan: the (n1, l1, l2; n2, l3) plan.
        p: true fraction defective in (0, 1).
        nodes: Gauss-Legendre nodes per dimension of the 3-D integral.

    Returns:
        OC value in [0, 1].
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    delta = -std_normal_quantile(p)
    first = oc_one_sided_single(plan.n1, plan.l1, p)
    a2u = _a2_one_sided(plan.n1, plan.n2, plan.l2, plan.l3, delta, nodes)
    a2l = _a2_one_sided(plan.n1, plan.n2, plan.l1, plan.l3, delta, nodes)
    return min(max(first + a2u - a2l, 0.0), 1.0)


def one_sided_asn(plan: OneSidedDoublePlan, p: float) -> float:
    """Expected sample number n1 + n2 * P(continue) at fraction defective p."""
    cont = (oc_one_sided_single(plan.n1, plan.l2, p)
            - oc_one_sided_single(plan.n1, plan.l1, p))
    return plan.n1 + plan.n2 * min(max(cont, 0.0), 1.0)


def one_sided_asn_max(plan: OneSidedDoublePlan,
                      grid_points: int = 160) -> tuple[float, float]:
    """Maximum ASN over p in (0, 1).

    Returns:
        (argmax p, max ASN); geometric coarse grid plus bounded polish.
    """
    from scipy.optimize import minimize_scalar

    grid = np.geomspace(1e-5, 0.9, grid_points)
    vals = np.array([one_sided_asn(plan, p) for p in grid])
    i = int(vals.argmax())
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda q: -one_sided_asn(plan, q), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-10})
    if -res.fun >= vals[i]:
        return float(res.x), float(-res.fun)
    return float(grid[i]), float(vals[i])


def translate_to_two_sided(plan: OneSidedDoublePlan):
    """Two-sided candidate: thresholds k~_i = Phi(l_i / sqrt(n)) with the
    first-sample size under l1, l2 and the pooled size under l3."""
    from .double import DoublePlan

    n1, n2 = plan.n1, plan.n2
    return DoublePlan(
        n1=n1,
        k1=float(std_normal_cdf(plan.l1 / math.sqrt(n1))),
        k2=float(std_normal_cdf(plan.l2 / math.sqrt(n1))),
        n2=n2,
        k3=float(std_normal_cdf(plan.l3 / math.sqrt(n1 + n2))),
    )


def translate_from_two_sided(plan) -> OneSidedDoublePlan:
    """Inverse of `translate_to_two_sided` (exact up to quantile round-trip)."""
    n1, n2 = plan.n1, plan.n2
    return OneSidedDoublePlan(
        n1=n1,
        l1=math.sqrt(n1) * float(std_normal_quantile(plan.k1)),
        l2=math.sqrt(n1) * float(std_normal_quantile(plan.k2)),
        n2=n2,
        l3=math.sqrt(n1 + n2) * float(std_normal_quantile(plan.k3)),
    )
