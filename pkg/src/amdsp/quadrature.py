"""Quadrature plumbing: cached Gauss-Legendre rules and shared cutoffs.

The OC integrands are smooth inside their supports but vanish like
sqrt(boundary - x) wherever an acceptance interval collapses, so the
integrators substitute x = b - tau^2 on intervals whose upper end b is such a
collapse point.  Chi-square directions are clipped to quantile cutoffs whose
discarded mass (~1e-14 per side) is far below every tolerance used here;
normal directions are clipped at +-Z_CUT.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .special import chi2_quantile

__all__ = ["QuadratureConfig", "DEFAULT_CONFIG", "gauss_legendre", "map_to"]

# Phi(-Z_CUT) ~ 5e-17: tail mass invisible at the 1e-6 probability tolerance
Z_CUT = 8.3
CHI2_TAIL = 1e-14


@dataclass(frozen=True)
class QuadratureConfig:
    """Node budget and tolerances for the multi-dimensional OC integrals.

    nodes_per_dim: Gauss-Legendre nodes per tensor dimension (default 32,
        ~1.05M integrand evaluations per 4-D probability).
    abs_tol: target absolute error on probabilities; checked evaluators raise
        QuadratureConvergenceError when a refinement estimate exceeds it.
    mu_table_accuracy: accuracy of the memoized mu_upper Chebyshev tables.
    """

    nodes_per_dim: int = 32
    abs_tol: float = 1e-6
    mu_table_accuracy: float = 1e-9

    def __post_init__(self):
        if self.nodes_per_dim < 8:
            raise ValueError("nodes_per_dim must be >= 8")
        if self.abs_tol <= 0.0:
            raise ValueError("abs_tol must be positive")
        if self.mu_table_accuracy <= 0.0:
            raise ValueError("mu_table_accuracy must be positive")


DEFAULT_CONFIG = QuadratureConfig()


@lru_cache(maxsize=64)
def gauss_legendre(n: int):
    """Nodes and weights on [-1, 1], cached per order."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def map_to(a: float, b: float, x: np.ndarray, w: np.ndarray):
    """Affine image of the reference rule on [a, b]."""
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


@lru_cache(maxsize=256)
def chi2_cutoffs(r: int):
    """(low, high) chi-square quantiles at the shared tail mass."""
    return chi2_quantile(CHI2_TAIL, r), chi2_quantile(1.0 - CHI2_TAIL, r)
