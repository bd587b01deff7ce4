"""Population-size adaptation.

The population size is steered by an evolution path defined over the
distribution parameters theta = (m, vech(Sigma)) with Sigma = sigma^2 C.
Each generation's parameter change is whitened by the square root of the
Gaussian Fisher metric and normalized by the expected squared norm of a
fitness-independent update, so the path has a calibrated length under
neutral selection.  A short path (noisy, cancelling updates) grows the
population; a long path (consistent updates) shrinks it back toward the
default.

The Fisher metric in these coordinates is block diagonal: Sigma^{-1} on the
mean block and the half-vectorized quadratic form W -> tr(W W)/2 with
W = Sigma^{-1/2} dSigma Sigma^{-1/2} on the covariance block, realized here
by weighting diagonal vech entries with 1/sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from psaes.core import DistributionState, EvolutionPaths, StrategyParams, advance_gamma, expected_norm

ALPHA = 1.4
BETA = 0.4
LAMBDA_MAX_FACTOR = 512


@dataclass
class PsaState:
    """Evolution path over distribution parameters and the population size."""

    p_theta: np.ndarray          # length n(n+3)/2
    gamma_theta: float
    lambda_real: float           # unrounded population size
    lambda_r: int                # rounded, bounded population size in use
    lambda_min: int
    lambda_max: int
    alpha: float = ALPHA
    beta: float = BETA


def initial_psa_state(n: int, lambda_def: int) -> PsaState:
    return PsaState(
        p_theta=np.zeros(n * (n + 3) // 2),
        gamma_theta=0.0,
        lambda_real=float(lambda_def),
        lambda_r=lambda_def,
        lambda_min=lambda_def,
        lambda_max=LAMBDA_MAX_FACTOR * lambda_def,
    )


def vech_index(i: int, j: int, n: int) -> int:
    """Position (1-based) of lower-triangle entry (i, j) in the vech layout.

    The lower triangle is stacked column by column: column j contributes
    its diagonal-and-below entries before column j+1 starts.
    """
    if not (1 <= j <= i <= n):
        raise ValueError(f"need 1 <= j <= i <= n, got (i={i}, j={j}, n={n})")
    return i - j + 1 + sum(n - k + 1 for k in range(1, j))


@lru_cache(maxsize=None)
def _vech_rows_cols(n: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = [], []
    for j in range(n):
        for i in range(j, n):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


def vech(M: np.ndarray) -> np.ndarray:
    """Stack the lower triangle of a symmetric matrix column by column."""
    rows, cols = _vech_rows_cols(M.shape[0])
    return M[rows, cols]


def unvech(v: np.ndarray, n: int) -> np.ndarray:
    """Rebuild the symmetric matrix whose vech is ``v``."""
    rows, cols = _vech_rows_cols(n)
    M = np.zeros((n, n))
    M[rows, cols] = v
    M[cols, rows] = v
    return M


@dataclass(frozen=True)
class ParamDelta:
    """One generation's change of the distribution parameters."""

    delta_m: np.ndarray
    delta_sigma_vech: np.ndarray   # vech of sigma_new^2 C_new - sigma_old^2 C_old

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.delta_m, self.delta_sigma_vech])


def compute_delta_theta(
    state_old: DistributionState,
    m_new: np.ndarray,
    sigma_new: float,
    C_new: np.ndarray,
) -> ParamDelta:
    """Parameter change (dm, vech(dSigma)) for one generation.

    ``sigma_new`` is the step size right after the cumulative adaptation,
    before any correction: the correction runs after the population-size
    update and therefore cannot have fed into this delta.
    """
    d_sigma = sigma_new**2 * C_new - state_old.sigma**2 * state_old.C
    return ParamDelta(delta_m=np.asarray(m_new) - state_old.m, delta_sigma_vech=vech(d_sigma))


def _inv_sqrt_c_matrix(state: DistributionState) -> np.ndarray:
    vecs = state.eig_vectors
    return (vecs / np.sqrt(state.eig_values)) @ vecs.T


def fisher_sqrt_apply(delta: ParamDelta, state_old: DistributionState) -> np.ndarray:
    """Whiten a parameter delta by the square root of the Gaussian Fisher.

    Mean block: Sigma^{-1/2} dm.  Covariance block: vech of
    W = Sigma^{-1/2} dSigma Sigma^{-1/2} with diagonal entries scaled by
    1/sqrt(2), so the squared norm equals tr(W W)/2.
    """
    n = state_old.n
    if state_old.eig_values[0] <= 0:
        raise np.linalg.LinAlgError("Sigma is singular")
    inv_sqrt_c = _inv_sqrt_c_matrix(state_old)
    mean_block = (inv_sqrt_c @ delta.delta_m) / state_old.sigma
    d_sigma = unvech(delta.delta_sigma_vech, n)
    W = inv_sqrt_c @ d_sigma @ inv_sqrt_c / state_old.sigma**2
    w_vech = vech(W).copy()
    rows, cols = _vech_rows_cols(n)
    w_vech[rows == cols] /= math.sqrt(2.0)
    return np.concatenate([mean_block, w_vech])


def estimate_expected_sqnorm(
    state: DistributionState,
    paths: EvolutionPaths,
    params: StrategyParams,
    rng: np.random.Generator,
    M: int,
) -> float:
    """Monte Carlo mean of ||sqrt(F) dtheta||^2 under fitness-independent ranking.

    Draws M hypothetical one-generation updates from the current state with
    the ranking replaced by a uniformly random one (equivalently: weights
    applied to i.i.d. samples in sampling order) and averages the whitened
    squared parameter change.  Uses its own generator so the main sampling
    stream is unaffected.
    """
    if M < 1:
        raise ValueError(f"sample count must be >= 1, got {M}")
    n = state.n
    lam = params.lambda_r
    w = params.weights

    z = rng.standard_normal((M, lam, n))
    y = state.sqrt_c_matmul(z)                       # (M, lam, n) displacements
    step = np.einsum("k,mkn->mn", w, y)              # (m_new - m) / sigma, c_m = 1
    delta_m = state.sigma * step

    inv_sqrt_c = _inv_sqrt_c_matrix(state)
    k_sigma = math.sqrt(params.c_sigma * (2.0 - params.c_sigma) * params.mu_w)
    p_sigma_new = (1.0 - params.c_sigma) * paths.p_sigma + k_sigma * step @ inv_sqrt_c.T

    gamma_sigma_new = advance_gamma(paths.gamma_sigma, params.c_sigma)
    chi_n = expected_norm(n)
    norms = np.linalg.norm(p_sigma_new, axis=1)
    sigma_new = state.sigma * np.exp(
        (params.c_sigma / params.d_sigma) * (norms / chi_n - math.sqrt(gamma_sigma_new))
    )

    h = (norms < (1.4 + 2.0 / (n + 1.0)) * chi_n * math.sqrt(gamma_sigma_new)).astype(float)
    k_c = math.sqrt(params.c_c * (2.0 - params.c_c) * params.mu_w)
    p_c_new = (1.0 - params.c_c) * paths.p_c + h[:, None] * k_c * step
    gamma_c_new = (1.0 - params.c_c) ** 2 * paths.gamma_c + h * params.c_c * (2.0 - params.c_c)

    rank_one = np.einsum("mi,mj->mij", p_c_new, p_c_new)
    rank_mu = np.einsum("k,mki,mkj->mij", w, y, y)
    C_new = (
        state.C
        + params.c_1 * (rank_one - gamma_c_new[:, None, None] * state.C)
        + params.c_mu * (rank_mu - state.C)
    )

    d_sigma = sigma_new[:, None, None] ** 2 * C_new - state.sigma**2 * state.C
    mean_block = (delta_m @ inv_sqrt_c.T) / state.sigma
    W = np.einsum("ab,mbc,cd->mad", inv_sqrt_c, d_sigma, inv_sqrt_c) / state.sigma**2
    sq = np.sum(mean_block**2, axis=1) + 0.5 * np.sum(W**2, axis=(1, 2))
    return float(np.mean(sq))


def update_p_theta(
    psa: PsaState, fisher_delta: np.ndarray, estimate: float
) -> np.ndarray:
    """Accumulate one whitened, normalized parameter change into the path."""
    if estimate <= 0:
        raise ValueError(f"expected squared norm must be positive, got {estimate}")
    beta = psa.beta
    return (1.0 - beta) * psa.p_theta + math.sqrt(beta * (2.0 - beta)) * (
        fisher_delta / math.sqrt(estimate)
    )


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def update_lambda(
    psa: PsaState, gamma_theta_new: float, p_theta_new: np.ndarray
) -> tuple[float, int]:
    """Grow or shrink the population from the path length, then round and bound."""
    beta = psa.beta
    exponent = beta * (gamma_theta_new - float(np.sum(p_theta_new**2)) / psa.alpha)
    lambda_real = psa.lambda_real * math.exp(exponent)
    lambda_r = min(max(_round_half_away(lambda_real), psa.lambda_min), psa.lambda_max)
    return lambda_real, lambda_r
