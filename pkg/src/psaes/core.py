"""Search-distribution state and the per-generation CMA-ES updates.

The sampled distribution is N(m, sigma^2 C).  One generation samples a
population, ranks it by fitness, recombines the best half into a new mean,
adapts the step size from the cumulative evolution path, and adapts the
covariance shape from the rank-1 and rank-mu terms.  Strategy constants are
recomputed every generation because the population size may change between
generations.

All update functions are pure: they take the previous state and return new
values, so a generation can be replayed or inspected piecewise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class CovarianceError(RuntimeError):
    """The shape matrix lost symmetry or positive definiteness."""


def eigen_floor(C: np.ndarray) -> float:
    """Smallest eigenvalue allowed for a shape matrix of this scale."""
    n = C.shape[0]
    return 1e-14 * float(np.trace(C)) / n


@dataclass
class DistributionState:
    """Mean, step size and covariance shape of the search distribution.

    The eigendecomposition of ``C`` is computed once at construction and
    cached; it backs both sampling (C^{1/2} action) and the path update
    (C^{-1/2} action).  Construction fails if ``C`` is not symmetric
    positive definite, which signals a corrupted state.
    """

    m: np.ndarray
    sigma: float
    C: np.ndarray
    generation: int = 0
    eig_values: np.ndarray = field(default=None, repr=False)
    eig_vectors: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.m = np.asarray(self.m, dtype=float)
        self.C = np.asarray(self.C, dtype=float)
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.C.shape != (self.n, self.n):
            raise ValueError("C must be n x n")
        if np.max(np.abs(self.C - self.C.T)) != 0.0:
            raise CovarianceError("C is not symmetric")
        if self.eig_values is None:
            vals, vecs = np.linalg.eigh(self.C)
            self.eig_values = vals
            self.eig_vectors = vecs
        if self.eig_values[0] <= 0.0:
            raise CovarianceError(
                f"C is not positive definite (smallest eigenvalue {self.eig_values[0]:g})"
            )

    @property
    def n(self) -> int:
        return self.m.shape[0]

    def sqrt_c_matmul(self, z: np.ndarray) -> np.ndarray:
        """Apply C^{1/2} to rows of ``z`` (any leading shape, last axis n)."""
        scaled = z * np.sqrt(self.eig_values)
        return scaled @ self.eig_vectors.T

    def inv_sqrt_c_apply(self, v: np.ndarray) -> np.ndarray:
        """Apply C^{-1/2} to a single n-vector."""
        return self.eig_vectors @ ((self.eig_vectors.T @ v) / np.sqrt(self.eig_values))


@dataclass
class EvolutionPaths:
    """Exponentially smoothed update histories and their normalization factors.

    ``gamma_sigma`` and ``gamma_c`` start at 0 with the zero paths and
    converge to 1, tracking how much history each path has accumulated.
    """

    p_sigma: np.ndarray
    p_c: np.ndarray
    gamma_sigma: float = 0.0
    gamma_c: float = 0.0


def initial_paths(n: int) -> EvolutionPaths:
    return EvolutionPaths(p_sigma=np.zeros(n), p_c=np.zeros(n))


@dataclass(frozen=True)
class StrategyParams:
    """Population-size-derived constants, recomputed each generation."""

    lambda_r: int
    mu: int
    weights: np.ndarray      # length lambda_r, zero beyond mu
    mu_w: float              # variance-effective selection mass (mu_eff)
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    c_m: float = 1.0


@dataclass
class Population:
    """Sampled candidates with fitnesses and the ascending fitness ranking."""

    points: np.ndarray       # (lambda_r, n)
    fitnesses: np.ndarray    # (lambda_r,)
    rank_order: np.ndarray   # argsort of fitnesses, best first

    def ranked_points(self) -> np.ndarray:
        return self.points[self.rank_order]


def default_lambda(n: int) -> int:
    """Default population size 4 + floor(3 ln n)."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return 4 + int(math.floor(3.0 * math.log(n)))


def derive_params(lambda_r: int, n: int) -> StrategyParams:
    """Recompute selection weights and learning rates for a population size.

    mu is half the population; the first mu weights decay logarithmically
    with rank and sum to one, the rest are zero.  The learning rates follow
    the standard dimension- and mu_eff-dependent defaults.
    """
    if lambda_r < 2:
        raise ValueError(f"population size must be >= 2, got {lambda_r}")
    mu = lambda_r // 2
    raw = np.log((lambda_r + 1) / 2.0) - np.log(np.arange(1, mu + 1))
    weights = np.zeros(lambda_r)
    weights[:mu] = raw / raw.sum()
    mu_w = 1.0 / float(np.sum(weights[:mu] ** 2))
    c_sigma = (mu_w + 2.0) / (n + mu_w + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_w - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_w / n) / (n + 4.0 + 2.0 * mu_w / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_w)
    c_mu = min(1.0 - c_1, 2.0 * (mu_w - 2.0 + 1.0 / mu_w) / ((n + 2.0) ** 2 + mu_w))
    return StrategyParams(
        lambda_r=lambda_r,
        mu=mu,
        weights=weights,
        mu_w=mu_w,
        c_sigma=c_sigma,
        d_sigma=d_sigma,
        c_c=c_c,
        c_1=c_1,
        c_mu=c_mu,
    )


def sample_population(
    state: DistributionState, params: StrategyParams, rng: np.random.Generator
) -> np.ndarray:
    """Draw lambda_r candidates m + sigma C^{1/2} z with z standard normal."""
    z = rng.standard_normal((params.lambda_r, state.n))
    return state.m + state.sigma * state.sqrt_c_matmul(z)


def rank_population(points: np.ndarray, fitnesses: np.ndarray) -> Population:
    fitnesses = np.asarray(fitnesses, dtype=float)
    order = np.argsort(fitnesses, kind="stable")
    return Population(points=points, fitnesses=fitnesses, rank_order=order)


def update_mean(state: DistributionState, pop: Population, params: StrategyParams) -> np.ndarray:
    """Weighted recombination of the mu best candidates."""
    best = pop.points[pop.rank_order[: params.mu]]
    shift = params.weights[: params.mu] @ (best - state.m)
    return state.m + params.c_m * shift


def update_p_sigma(
    paths: EvolutionPaths,
    state_old: DistributionState,
    m_new: np.ndarray,
    params: StrategyParams,
) -> np.ndarray:
    """Accumulate the whitened mean step into the step-size path."""
    step = (m_new - state_old.m) / state_old.sigma
    coeff = math.sqrt(params.c_sigma * (2.0 - params.c_sigma) * params.mu_w)
    return (1.0 - params.c_sigma) * paths.p_sigma + coeff * state_old.inv_sqrt_c_apply(step)


def expected_norm(n: int) -> float:
    """Expected length of an n-variate standard normal vector."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n**2))


def advance_gamma(gamma: float, c: float, active: float = 1.0) -> float:
    """One step of the normalization-factor recurrence (fixed point 1)."""
    return (1.0 - c) ** 2 * gamma + active * c * (2.0 - c)


def update_gammas(
    paths: EvolutionPaths, params: StrategyParams, h_sigma: int
) -> tuple[float, float]:
    """Advance gamma_sigma (always) and gamma_c (gated by h_sigma)."""
    gamma_sigma = advance_gamma(paths.gamma_sigma, params.c_sigma)
    gamma_c = advance_gamma(paths.gamma_c, params.c_c, active=float(h_sigma))
    return gamma_sigma, gamma_c


def update_sigma_csa(
    state: DistributionState,
    p_sigma_new: np.ndarray,
    gamma_sigma_new: float,
    params: StrategyParams,
    n: int,
) -> float:
    """Scale the step size by comparing the path length to its expectation."""
    ratio = float(np.linalg.norm(p_sigma_new)) / expected_norm(n)
    return state.sigma * math.exp(
        (params.c_sigma / params.d_sigma) * (ratio - math.sqrt(gamma_sigma_new))
    )


def update_p_c_and_h(
    paths: EvolutionPaths,
    state_old: DistributionState,
    m_new: np.ndarray,
    params: StrategyParams,
    p_sigma_new: np.ndarray,
    gamma_sigma_new: float,
    n: int,
) -> tuple[np.ndarray, int]:
    """Advance the covariance path, stalled when the step-size path is long.

    h_sigma gates the rank-1 contribution: when the step-size path exceeds
    its expected length the covariance path decays without accumulating,
    preventing the shape from chasing a step-size transient.
    """
    threshold = (1.4 + 2.0 / (n + 1.0)) * expected_norm(n) * math.sqrt(gamma_sigma_new)
    h_sigma = 1 if float(np.linalg.norm(p_sigma_new)) < threshold else 0
    step = (m_new - state_old.m) / state_old.sigma
    coeff = math.sqrt(params.c_c * (2.0 - params.c_c) * params.mu_w)
    p_c_new = (1.0 - params.c_c) * paths.p_c + h_sigma * coeff * step
    return p_c_new, h_sigma


def update_covariance(
    state_old: DistributionState,
    p_c_new: np.ndarray,
    gamma_c_new: float,
    pop: Population,
    params: StrategyParams,
) -> np.ndarray:
    """Combine the rank-1 and rank-mu terms into the new shape matrix.

    The rank-mu outer products use the old mean and are normalized by
    sigma^2 so that C stays a shape matrix for sampling m + sigma N(0, C).
    The result is symmetrized and eigenvalues are clamped to a floor
    relative to the trace; clamping is a repair event and is logged.
    """
    y = (pop.ranked_points() - state_old.m) / state_old.sigma
    rank_mu = (y * params.weights[:, None]).T @ y
    C = (
        state_old.C
        + params.c_1 * (np.outer(p_c_new, p_c_new) - gamma_c_new * state_old.C)
        + params.c_mu * (rank_mu - state_old.C)
    )
    C = (C + C.T) / 2.0
    vals, vecs = np.linalg.eigh(C)
    floor = eigen_floor(C)
    if vals[0] < floor:
        logger.warning(
            "covariance repair at generation %d: smallest eigenvalue %g clamped to %g",
            state_old.generation,
            vals[0],
            floor,
        )
        vals = np.maximum(vals, floor)
        C = (vecs * vals) @ vecs.T
        C = (C + C.T) / 2.0
    return C
