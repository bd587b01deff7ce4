"""Step-size correction after a population-size change.

A population-size change shifts the selection intensity, so the step size
that was well-calibrated for the old population is not for the new one.
The correction rescales sigma by the ratio of a scaling factor rho
evaluated at the new and old configurations.  rho is built from expected
normal order statistics of the fitness sample, located at a scalar proxy
for the current mean.

The always-on rule applies the ratio every generation.  Because rho rises
as the proxy falls (the search approaching a minimum), the ratio compounds
above 1 even when the population barely changes, inflating sigma without
bound.  The conditional rule therefore skips the correction while the
cumulative step-size path is long (the adaptation itself still wants to
explore), and damps it by kappa while the population-size change is below
the significance level L.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

logger = logging.getLogger(__name__)

BLOM_ALPHA = 0.375

# Branch codes recorded in the trace.
BRANCH_SKIPPED = 0          # no correction: path long, or correction disabled
BRANCH_SCALED = 1           # kappa-damped ratio (population change below L)
BRANCH_FULL_RATIO = 2       # full ratio (population change at least L)
BRANCH_GENERAL = 3          # always-on rule applied

VARIANTS = ("general", "reformulated", "none")
MU_PROXY_MODES = ("mean-of-m-components", "f-of-m")


@dataclass(frozen=True)
class CorrectionConfig:
    """How (and whether) the correction is applied."""

    kappa: float = 0.5
    L: int = 6
    variant: str = "reformulated"
    mu_proxy_mode: str = "mean-of-m-components"
    include_sigma_scale: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must be in (0, 1], got {self.kappa}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.mu_proxy_mode not in MU_PROXY_MODES:
            raise ValueError(
                f"mu_proxy_mode must be one of {MU_PROXY_MODES}, got {self.mu_proxy_mode!r}"
            )


@dataclass(frozen=True)
class RhoInputs:
    """Everything rho needs for one population configuration."""

    lambda_r: int
    weights: np.ndarray        # full length, zero beyond mu
    mu_w: float
    n: int
    mu_proxy: float            # scalar location of the order statistics
    sigma: float
    include_sigma_scale: bool = True


def expected_order_stat(rank: int, inputs: RhoInputs) -> float:
    """Approximate expected value of the rank-th smallest of lambda_r normals.

    Uses the quantile plotting position (rank - 0.375) / (lambda_r + 0.25),
    located at the mean proxy and scaled by sigma when configured.
    """
    if not 1 <= rank <= inputs.lambda_r:
        raise ValueError(f"rank must be in 1..{inputs.lambda_r}, got {rank}")
    scale = inputs.sigma if inputs.include_sigma_scale else 1.0
    q = (rank - BLOM_ALPHA) / (inputs.lambda_r - 2.0 * BLOM_ALPHA + 1.0)
    return inputs.mu_proxy + scale * float(ndtri(q))


def weighted_order_stat_sum(inputs: RhoInputs) -> float:
    """S = -sum_i w_i E[N_i], positive when selection pulls below the proxy."""
    ranks = np.arange(1, inputs.lambda_r + 1)
    scale = inputs.sigma if inputs.include_sigma_scale else 1.0
    q = (ranks - BLOM_ALPHA) / (inputs.lambda_r - 2.0 * BLOM_ALPHA + 1.0)
    stats = inputs.mu_proxy + scale * ndtri(q)
    return -float(np.sum(inputs.weights * stats))


def rho(inputs: RhoInputs) -> float | None:
    """Scaling factor n S mu_w / (n - 1 + S^2 mu_w), or None when S <= 0.

    A nonpositive S flips the factor's sign, which has no meaning as a
    scale; the None return is the correction-skip signal and callers treat
    the ratio as 1.
    """
    S = weighted_order_stat_sum(inputs)
    if S <= 0.0:
        return None
    return inputs.n * S * inputs.mu_w / (inputs.n - 1.0 + S**2 * inputs.mu_w)


def correction_ratio(rho_new: float | None, rho_old: float | None) -> float | None:
    """Multiplicative correction rho_new / rho_old, or None when degenerate.

    Either side tripping the S <= 0 guard (or a vanishing denominator)
    makes the ratio meaningless and the correction must be skipped.
    """
    if rho_new is None or rho_old is None or rho_old <= 0.0:
        return None
    return rho_new / rho_old


def correct_general(sigma_new: float, rho_new: float | None, rho_old: float | None) -> float:
    """Always-on correction sigma_new * rho_new / rho_old.

    A degenerate ratio (sign flip, vanishing or missing factor) leaves
    sigma unchanged with a logged warning.
    """
    ratio = correction_ratio(rho_new, rho_old)
    if ratio is None:
        logger.warning("step-size correction skipped: degenerate scaling factor")
        return sigma_new
    return sigma_new * ratio


def correct_reformulated(
    sigma_new: float,
    rho_new: float | None,
    rho_old: float | None,
    p_sigma_norm: float,
    expected_norm_n: float,
    lambda_new: int,
    lambda_old: int,
    config: CorrectionConfig,
) -> tuple[float, int]:
    """Conditional correction; returns the corrected sigma and a branch code.

    Branch 0: the step-size path is at least its expected length, so the
    adaptation already calls for exploration and the correction is skipped.
    Branch 1: population change below L, ratio damped by kappa.
    Branch 2: population change at least L, full ratio.
    The branch code depends only on the two tests; a degenerate ratio within
    branch 1 or 2 leaves sigma unchanged, as in the always-on rule.
    """
    if p_sigma_norm >= expected_norm_n:
        return sigma_new, BRANCH_SKIPPED
    ratio = correction_ratio(rho_new, rho_old)
    if abs(lambda_new - lambda_old) < config.L:
        if ratio is None:
            logger.warning("step-size correction skipped: degenerate scaling factor")
            return sigma_new, BRANCH_SCALED
        return sigma_new * config.kappa * ratio, BRANCH_SCALED
    if ratio is None:
        logger.warning("step-size correction skipped: degenerate scaling factor")
        return sigma_new, BRANCH_FULL_RATIO
    return sigma_new * ratio, BRANCH_FULL_RATIO


def mu_w_fit(lam: int) -> float:
    """Linear fit of the variance-effective selection mass as a function of lambda."""
    if lam < 2:
        raise ValueError(f"population size must be >= 2, got {lam}")
    return 0.2642 * lam + 0.5328


def delta_for_L(L: int) -> float:
    """Selection-mass change corresponding to a population change of L."""
    return 0.2642 * L


def theorem1_ratio_check(mu_proxies, base: RhoInputs) -> bool:
    """Executable form of the blow-up condition: rho ratios along a descent.

    For a nonincreasing mean-proxy sequence with the population (and hence
    weights and mu_w) frozen, every consecutive rho ratio must be at least
    1 - 1e-12.  Pairs where either side trips the S <= 0 guard contribute a
    ratio of 1, mirroring how the correction itself skips there.
    """
    proxies = [float(p) for p in mu_proxies]
    for a, b in zip(proxies[:-1], proxies[1:]):
        if b > a:
            raise ValueError("mean-proxy sequence must be nonincreasing")
    rhos = [
        rho(RhoInputs(
            lambda_r=base.lambda_r,
            weights=base.weights,
            mu_w=base.mu_w,
            n=base.n,
            mu_proxy=p,
            sigma=base.sigma,
            include_sigma_scale=base.include_sigma_scale,
        ))
        for p in proxies
    ]
    for r_old, r_new in zip(rhos[:-1], rhos[1:]):
        ratio = 1.0 if (r_old is None or r_new is None) else r_new / r_old
        if ratio < 1.0 - 1e-12:
            return False
    return True
