"""Plan designers: single plans, one-sided AM double plans, and the
tightened two-sided AM double plan.

All two-sided designs run through their one-sided approximation.  A one-sided
plan designed at working levels (alpha**, beta**) translates to two-sided
thresholds via k~ = Phi(l/sqrt(n)); because the two-sided OC is a band, the
translated plan can undershoot the band condition at p1 even though the
one-sided OC meets it exactly.  The designers therefore tighten: starting
from the nominal levels they lower alpha** (beta** stays put while the band
max at p2 keeps clearing beta, which it does in every observed case) in steps
of 0.001 until the translated plan's band extremes satisfy the original
requirement.

Single plans use the same mechanism with a one-sided *single* plan inside.
At the minimal feasible n the one-sided two-point condition admits a whole
interval [l_alpha, l_beta] of acceptance numbers; the midpoint is taken,
which reproduces published plans to ~1e-8 in k.

One-sided AM double plans (`design_one_sided_am`) minimize the maximum ASN
subject to the exact two-point equalities OC(p1) = 1 - alpha**,
OC(p2) = beta**.  For fixed (n1, n2) the equalities leave a one-parameter
family indexed by l1; N_max is minimized over a grid of l1 (with local
refinement), then over (n1, n2) inside a window around the one-sided
single-plan size, with monotone pruning on n1 (ASN >= n1) and U-shape early
stopping in n2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .double import DoublePlan, band_extreme_double
from .errors import InfeasibleDesignError
from .isoline import SpecLimits
from .one_sided import (OneSidedDoublePlan, oc_one_sided_double, oc_one_sided_single,
                        one_sided_asn_max, translate_to_two_sided)
from .quadrature import DEFAULT_CONFIG, QuadratureConfig
from .single import DesignRequirement, SinglePlan, band_extreme_single
from .special import std_normal_cdf

__all__ = [
    "SingleDesignResult",
    "TighteningStep",
    "design_single",
    "design_one_sided_single",
    "design_one_sided_am",
    "design_two_sided_am",
]

# slack accepted on OC conditions, well below every reported digit
_COND_TOL = 1e-9
_LEVEL_STEP = 1e-3


class SingleDesignResult(NamedTuple):
    plan: SinglePlan
    alpha_eff: float
    beta_eff: float


@dataclass(frozen=True)
class TighteningStep:
    """One row of the tightening loop: working levels, candidate, diagnostics."""

    alpha_star2: float
    beta_star2: float
    one_sided: OneSidedDoublePlan
    candidate: DoublePlan
    n_max: float
    min_oc_p1: float
    max_oc_p2: float


def _solve_l(n: int, p: float, target: float, lo: float = None, hi: float = None) -> float:
    """l with oc_one_sided_single(n, l, p) = target (OC is increasing in l)."""
    if lo is None or hi is None:
        span = 6.0 * math.sqrt(n)
        lo, hi = -span, span

    def f(l):
        return oc_one_sided_single(n, l, p) - target

    flo, fhi = f(lo), f(hi)
    grow = 0
    while flo > 0.0 and grow < 12:
        lo *= 1.7
        flo = f(lo)
        grow += 1
    grow = 0
    while fhi < 0.0 and grow < 12:
        hi *= 1.7
        fhi = f(hi)
        grow += 1
    if flo > 0.0 or fhi < 0.0:
        raise InfeasibleDesignError(
            f"no acceptance number reaches OC({p}) = {target} at n = {n}"
        )
    return brentq(f, lo, hi, xtol=1e-11)


def design_one_sided_single(p1: float, p2: float, alpha: float, beta: float,
                            n_start: int = None) -> tuple[int, float]:
    """Minimal one-sided single plan meeting the two-point condition.

    Feasibility at n requires l_alpha <= l_beta, where OC(n, l_alpha, p1)
    = 1 - alpha and OC(n, l_beta, p2) = beta; the returned acceptance number
    is the midpoint of the feasible interval.

    Returns:
        (n, l).
    """
    if p1 >= p2:
        raise InfeasibleDesignError("one-sided design needs p1 < p2")
    if 1.0 - alpha <= beta:
        raise InfeasibleDesignError("one-sided design needs 1 - alpha > beta")

    def bounds(n):
        la = _solve_l(n, p1, 1.0 - alpha)
        lb = _solve_l(n, p2, beta)
        return la, lb

    if n_start is None:
        # normal-approximation seed for the one-sided unknown-sigma plan
        from .special import std_normal_quantile

        za, zb = std_normal_quantile(1.0 - alpha), std_normal_quantile(1.0 - beta)
        z1, z2 = std_normal_quantile(1.0 - p1), std_normal_quantile(1.0 - p2)
        kmid = (za * z2 + zb * z1) / (za + zb)
        n_start = max(4, math.ceil(((za + zb) / (z1 - z2)) ** 2 * (1.0 + 0.5 * kmid ** 2)) - 4)

    n = max(4, n_start)
    la, lb = bounds(n)
    if la <= lb:
        while n > 4:
            la2, lb2 = bounds(n - 1)
            if la2 > lb2:
                break
            n -= 1
            la, lb = la2, lb2
    else:
        while la > lb:
            n += 1
            if n > 100_000:
                raise InfeasibleDesignError("one-sided single design did not close")
            la, lb = bounds(n)
    return n, 0.5 * (la + lb)


def design_single(req: DesignRequirement, lim: SpecLimits,
                  cfg: QuadratureConfig = DEFAULT_CONFIG,
                  max_iter: int = 60) -> SingleDesignResult:
    """Two-sided single plan via the tightened one-sided approximation.

    Lowers the working levels in 0.001 steps (alpha side; beta side only if
    the band max at p2 ever fails, which no known example needs) until the
    translated plan's band extremes meet the requirement.

    Returns:
        SingleDesignResult(plan, alpha_eff, beta_eff) where the effective
        levels are the final working levels of the loop.
    """
    alpha_t = round(req.alpha, 3)
    beta_t = round(req.beta, 3)
    for _ in range(max_iter):
        if alpha_t <= 0.0 or beta_t <= 0.0 or 1.0 - alpha_t <= beta_t:
            raise InfeasibleDesignError("single-plan tightening ran out of level room")
        n, l = design_one_sided_single(req.p1, req.p2, alpha_t, beta_t)
        plan = SinglePlan(n, float(std_normal_cdf(l / math.sqrt(n))))
        bmax = band_extreme_single(plan, req.p2, "max", lim, cfg)
        if bmax.value > req.beta + _COND_TOL:
            beta_t = round(beta_t - _LEVEL_STEP, 3)
            continue
        bmin = band_extreme_single(plan, req.p1, "min", lim, cfg)
        if bmin.value < 1.0 - req.alpha - _COND_TOL:
            alpha_t = round(alpha_t - _LEVEL_STEP, 3)
            continue
        return SingleDesignResult(plan, alpha_t, beta_t)
    raise InfeasibleDesignError("single-plan tightening exceeded its iteration budget")


class _EqualitySolver:
    """Solve OC(p1) = 1-alpha, OC(p2) = beta for (l2, l3) at fixed (n1, n2, l1)."""

    def __init__(self, n1: int, n2: int, p1: float, p2: float,
                 alpha: float, beta: float, nodes: int):
        self.n1, self.n2 = n1, n2
        self.p1, self.p2 = p1, p2
        self.target1 = 1.0 - alpha
        self.beta = beta
        self.nodes = nodes
        self.l3_cap = 6.0 * math.sqrt(n1 + n2)

    def _oc(self, l1, l2, l3, p):
        plan = OneSidedDoublePlan(self.n1, l1, max(l2, l1), self.n2, l3)
        return oc_one_sided_double(plan, p, self.nodes)

    def _solve_l3(self, l1, l2, guess):
        """l3 with OC(p2) = beta, or None when even l3 -> inf stays below beta."""
        hi_val = self._oc(l1, l2, self.l3_cap, self.p2)
        if hi_val < self.beta:
            return None
        lo, hi = guess - 2.0, guess + 2.0
        f = lambda l3: self._oc(l1, l2, l3, self.p2) - self.beta
        flo, fhi = f(lo), f(hi)
        grow = 0
        while flo > 0.0 and grow < 14:
            lo -= max(2.0 ** grow, 2.0)
            flo = f(lo)
            grow += 1
        grow = 0
        while fhi < 0.0 and grow < 14:
            hi = min(hi + max(2.0 ** grow, 2.0), self.l3_cap)
            fhi = f(hi)
            grow += 1
            if hi >= self.l3_cap and fhi < 0.0:
                return None
        if flo > 0.0 or fhi < 0.0:
            return None
        return brentq(f, lo, hi, xtol=1e-10)

    def solve(self, l1: float, l2_guess: float, l3_guess: float):
        """Return (l2, l3) satisfying both equalities, or None if infeasible.

        Nested: for trial l2, l3 is re-solved on the beta equality; the outer
        residual is the alpha-side OC shortfall, rooted over l2 >= l1.
        """
        state = {"l3": l3_guess}

        def residual(l2):
            l3 = self._solve_l3(l1, l2, state["l3"])
            if l3 is None:
                # beta equality unattainable: force the search toward larger OC(p1)
                return math.nan
            state["l3"] = l3
            return self._oc(l1, l2, l3, self.p1) - self.target1

        lo = max(l2_guess - 1.0, l1)
        hi = l2_guess + 1.0
        flo, fhi = residual(lo), residual(hi)
        grow = 0
        while not math.isnan(flo) and flo > 0.0 and lo > l1 and grow < 12:
            lo = max(lo - 2.0 ** grow, l1)
            flo = residual(lo)
            grow += 1
        grow = 0
        while (math.isnan(fhi) or fhi < 0.0) and grow < 12:
            hi += 2.0 ** grow
            fhi = residual(hi)
            if math.isnan(fhi):
                return None
            grow += 1
        if math.isnan(flo):
            return None
        if flo > 0.0 or fhi < 0.0:
            return None
        l2 = brentq(residual, lo, hi, xtol=1e-10)
        l3 = state["l3"]
        if l2 < l1:
            return None
        return l2, l3


def design_one_sided_am(req: DesignRequirement,
                        alpha: float = None, beta: float = None,
                        nodes: int = 24,
                        l1_grid: int = 9) -> OneSidedDoublePlan:
    """ASN-minimax one-sided double plan at working levels (alpha, beta).

    Minimizes the maximum ASN over all (n1, l1, l2; n2, l3) meeting the
    two-point equalities OC(p1) = 1 - alpha, OC(p2) = beta.

    Args:
        req: two-point requirement carrying p1, p2 (its alpha/beta are used
            unless overridden).
        alpha, beta: working levels, defaulting to the requirement's.
        nodes: per-dimension nodes of the 3-D OC integral inside the search.
        l1_grid: coarse grid size over the free first-stage parameter.

    Returns:
        The minimizing OneSidedDoublePlan.
    """
    alpha = req.alpha if alpha is None else alpha
    beta = req.beta if beta is None else beta
    if 1.0 - alpha <= beta:
        raise InfeasibleDesignError("working levels degenerate: need 1 - alpha > beta")
    p1, p2 = req.p1, req.p2

    n_single, _ = design_one_sided_single(p1, p2, alpha, beta)
    n1_lo = max(2, math.ceil(0.40 * n_single))
    n1_hi = n_single + 1

    best: tuple[float, OneSidedDoublePlan] | None = None

    for n1 in range(n1_lo, n1_hi + 1):
        if best is not None and n1 >= best[0]:
            break
        n2_lo = max(2, math.ceil(0.30 * n1))
        n2_hi = max(n2_lo + 4, math.ceil(2.2 * n1))
        found_feasible = False
        rising = 0
        prev_val = math.inf
        for n2 in range(n2_lo, n2_hi + 1):
            res = _best_over_l1(n1, n2, p1, p2, alpha, beta, nodes, l1_grid)
            if res is None:
                if found_feasible:
                    break  # feasibility is contiguous in n2; past its end
                continue
            val, plan = res
            found_feasible = True
            if best is None or val < best[0]:
                best = (val, plan)
            rising = rising + 1 if val >= prev_val - 1e-9 else 0
            prev_val = val
            if rising >= 3:
                break  # N_max is past its n2-minimum
    if best is None:
        raise InfeasibleDesignError(
            f"no one-sided double plan meets OC({p1}) = {1 - alpha}, OC({p2}) = {beta}"
        )
    return best[1]


def _best_over_l1(n1, n2, p1, p2, alpha, beta, nodes, l1_grid):
    """Minimal N_max over the l1-family at fixed (n1, n2); None if infeasible."""
    solver = _EqualitySolver(n1, n2, p1, p2, alpha, beta, nodes)
    try:
        l1_hi = _solve_l(n1, p2, beta)            # first stage alone hits beta
        l1_lo = _solve_l(n1, p1, 0.02)            # below this stage 1 is inert
    except InfeasibleDesignError:
        return None
    if l1_lo >= l1_hi:
        l1_lo = l1_hi - 3.0
    grid = np.linspace(l1_lo, l1_hi - 1e-6, l1_grid)

    l2_guess = l1_hi + 0.5
    l3_guess = 0.5 * (l1_lo + l1_hi) * math.sqrt((n1 + n2) / n1)
    evaluated: list[tuple[float, float, OneSidedDoublePlan]] = []
    for l1 in grid:
        sol = solver.solve(l1, l2_guess, l3_guess)
        if sol is None:
            continue
        l2, l3 = sol
        l2_guess, l3_guess = l2, l3
        plan = OneSidedDoublePlan(n1, float(l1), float(l2), n2, float(l3))
        _, nmax = one_sided_asn_max(plan)
        evaluated.append((nmax, float(l1), plan))
    if not evaluated:
        return None
    evaluated.sort(key=lambda t: t[0])
    best_val, best_l1, best_plan = evaluated[0]

    # local quadratic-free polish: shrink the l1 interval around the best cell
    step = (grid[1] - grid[0]) if len(grid) > 1 else 0.5
    lo, hi = best_l1 - step, best_l1 + step
    for _ in range(16):
        for l1 in (lo + (hi - lo) * 0.382, lo + (hi - lo) * 0.618):
            sol = solver.solve(l1, l2_guess, l3_guess)
            if sol is None:
                continue
            l2, l3 = sol
            l2_guess, l3_guess = l2, l3
            plan = OneSidedDoublePlan(n1, float(l1), float(l2), n2, float(l3))
            _, nmax = one_sided_asn_max(plan)
            if nmax < best_val:
                best_val, best_l1, best_plan = nmax, float(l1), plan
        width = hi - lo
        lo = max(best_l1 - 0.382 * width, l1_lo)
        hi = min(best_l1 + 0.382 * width, l1_hi)
        if width < 2e-4:
            break
    return best_val, best_plan


def design_two_sided_am(req: DesignRequirement, lim: SpecLimits,
                        cfg: QuadratureConfig = DEFAULT_CONFIG,
                        max_iter: int = 40,
                        search_nodes: int = 24) -> tuple[DoublePlan, list[TighteningStep]]:
    """ASN-minimax two-sided double plan with the alpha**/beta** tightening loop.

    Starts the working levels at the tightened levels of the corresponding
    single plan and lowers them in 0.001 steps (beta side checked first) until
    the translated candidate's band extremes meet the original requirement.

    Returns:
        (final plan, trace); the trace records one TighteningStep per working
        level attempted, the last one satisfying both band conditions.

    Raises:
        InfeasibleDesignError: when the loop exhausts its budget; the partial
            trace is attached as the exception's `trace` attribute.
    """
    single = design_single(req, lim, cfg)
    alpha_t = round(single.alpha_eff, 3)
    beta_t = round(single.beta_eff, 3)
    trace: list[TighteningStep] = []
    for _ in range(max_iter):
        if alpha_t <= 0.0 or beta_t <= 0.0 or 1.0 - alpha_t <= beta_t:
            err = InfeasibleDesignError("two-sided tightening ran out of level room")
            err.trace = trace
            raise err
        one_sided = design_one_sided_am(req, alpha=alpha_t, beta=beta_t,
                                        nodes=search_nodes)
        candidate = translate_to_two_sided(one_sided)
        _, nmax = one_sided_asn_max(one_sided)
        bmax = band_extreme_double(candidate, req.p2, "max", lim, cfg)
        bmin = band_extreme_double(candidate, req.p1, "min", lim, cfg)
        trace.append(TighteningStep(
            alpha_star2=alpha_t, beta_star2=beta_t, one_sided=one_sided,
            candidate=candidate, n_max=nmax,
            min_oc_p1=bmin.value, max_oc_p2=bmax.value,
        ))
        if bmax.value > req.beta + _COND_TOL:
            beta_t = round(beta_t - _LEVEL_STEP, 3)
            continue
        if bmin.value < 1.0 - req.alpha - _COND_TOL:
            alpha_t = round(alpha_t - _LEVEL_STEP, 3)
            continue
        return candidate, trace
    err = InfeasibleDesignError("two-sided tightening exceeded its iteration budget")
    err.trace = trace
    raise err
