"""One full optimizer generation, wiring the core updates together.

Order within a generation: recompute strategy constants for the population
size in use, sample and rank, update the mean, advance the step-size path
and step size, advance the covariance path and covariance, update the
population size (adaptively or from a forced schedule), then apply the
configured step-size correction to the freshly adapted sigma.  The state
carried into the next generation holds the corrected sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from psaes import core, psa as psa_mod
from psaes.benchmarks import ObjectiveFunction
from psaes.correction import (
    BRANCH_GENERAL,
    BRANCH_SKIPPED,
    CorrectionConfig,
    RhoInputs,
    correct_general,
    correct_reformulated,
    correction_ratio,
    rho,
)
from psaes.core import DistributionState, EvolutionPaths, Population, StrategyParams
from psaes.psa import PsaState
from psaes.rng import TAG_PSA_MC, TAG_SAMPLE, substream

ALGORITHMS = ("cma-es", "psa-general", "psa-reformulated", "psa-no-correction")
SCHEDULES = ("adaptive", "forced-increasing", "forced-decreasing", "frozen")

ALGORITHM_VARIANTS = {
    "cma-es": "none",
    "psa-general": "general",
    "psa-reformulated": "reformulated",
    "psa-no-correction": "none",
}


@dataclass(frozen=True)
class GenerationOptions:
    """Per-run switches for the generation loop."""

    algorithm: str = "psa-reformulated"
    kappa: float = 0.5
    L: int = 6
    mu_proxy_mode: str = "mean-of-m-components"
    include_sigma_scale: bool = True
    lambda_schedule: str = "adaptive"
    mc_samples: int = 128
    seed: int = 0
    clamp_to_domain: bool = False

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.lambda_schedule not in SCHEDULES:
            raise ValueError(
                f"lambda_schedule must be one of {SCHEDULES}, got {self.lambda_schedule!r}"
            )
        if self.algorithm == "cma-es" and self.lambda_schedule != "frozen":
            raise ValueError("plain cma-es runs with a frozen population size")
        if self.mc_samples < 1:
            raise ValueError(f"mc_samples must be >= 1, got {self.mc_samples}")

    @property
    def variant(self) -> str:
        return ALGORITHM_VARIANTS[self.algorithm]

    @property
    def psa_active(self) -> bool:
        return self.algorithm != "cma-es" and self.lambda_schedule == "adaptive"

    def correction_config(self) -> CorrectionConfig:
        return CorrectionConfig(
            kappa=self.kappa,
            L=self.L,
            variant=self.variant,
            mu_proxy_mode=self.mu_proxy_mode,
            include_sigma_scale=self.include_sigma_scale,
        )


@dataclass
class GenerationResult:
    """New state plus the per-generation quantities recorded in the trace."""

    state: DistributionState
    paths: EvolutionPaths
    psa: PsaState
    params: StrategyParams
    population: Population = field(repr=False)
    lambda_real_used: float = 0.0
    lambda_r_used: int = 0
    sigma_pre_correction: float = 0.0
    sigma_post_correction: float = 0.0
    correction_branch: int = BRANCH_SKIPPED
    p_sigma_norm: float = 0.0
    h_sigma: int = 0
    f_best: float = math.inf
    f_of_mean: float = math.inf
    n_evals: int = 0


def mu_proxy_value(mode: str, m: np.ndarray, objective: ObjectiveFunction) -> float:
    """Scalar location proxy for the order statistics of the fitness sample."""
    if mode == "mean-of-m-components":
        return float(np.mean(m))
    return float(objective(m))


def _rho_inputs(
    params: StrategyParams, n: int, mu_proxy: float, sigma: float, config: CorrectionConfig
) -> RhoInputs:
    return RhoInputs(
        lambda_r=params.lambda_r,
        weights=params.weights,
        mu_w=params.mu_w,
        n=n,
        mu_proxy=mu_proxy,
        sigma=sigma,
        include_sigma_scale=config.include_sigma_scale,
    )


def run_generation(
    state: DistributionState,
    paths: EvolutionPaths,
    psa: PsaState,
    objective: ObjectiveFunction,
    options: GenerationOptions,
    forced_lambda_next: int | None = None,
) -> GenerationResult:
    """Execute one generation and return the updated state bundle.

    ``forced_lambda_next`` overrides the population size for the next
    generation (forced schedules); it disables the adaptive update.
    """
    n = state.n
    g = state.generation
    config = options.correction_config()

    params = core.derive_params(psa.lambda_r, n)

    rng = substream(options.seed, g, TAG_SAMPLE)
    points = core.sample_population(state, params, rng)
    fitnesses = np.array([objective(x) for x in points])
    pop = core.rank_population(points, fitnesses)

    m_new = core.update_mean(state, pop, params)
    if options.clamp_to_domain:
        box = objective.domain_box
        m_new = np.clip(m_new, box[:, 0], box[:, 1])

    p_sigma_new = core.update_p_sigma(paths, state, m_new, params)
    gamma_sigma_new = core.advance_gamma(paths.gamma_sigma, params.c_sigma)
    sigma_csa = core.update_sigma_csa(state, p_sigma_new, gamma_sigma_new, params, n)
    p_c_new, h_sigma = core.update_p_c_and_h(
        paths, state, m_new, params, p_sigma_new, gamma_sigma_new, n
    )
    gamma_c_new = core.advance_gamma(paths.gamma_c, params.c_c, active=float(h_sigma))
    C_new = core.update_covariance(state, p_c_new, gamma_c_new, pop, params)

    paths_new = EvolutionPaths(
        p_sigma=p_sigma_new, p_c=p_c_new, gamma_sigma=gamma_sigma_new, gamma_c=gamma_c_new
    )

    # Population size for the next generation.
    if forced_lambda_next is not None:
        psa_new = PsaState(
            p_theta=psa.p_theta,
            gamma_theta=psa.gamma_theta,
            lambda_real=float(forced_lambda_next),
            lambda_r=int(forced_lambda_next),
            lambda_min=psa.lambda_min,
            lambda_max=psa.lambda_max,
            alpha=psa.alpha,
            beta=psa.beta,
        )
    elif options.psa_active:
        delta = psa_mod.compute_delta_theta(state, m_new, sigma_csa, C_new)
        fisher_delta = psa_mod.fisher_sqrt_apply(delta, state)
        mc_rng = substream(options.seed, g, TAG_PSA_MC)
        estimate = psa_mod.estimate_expected_sqnorm(
            state, paths, params, mc_rng, options.mc_samples
        )
        p_theta_new = psa_mod.update_p_theta(psa, fisher_delta, estimate)
        gamma_theta_new = core.advance_gamma(psa.gamma_theta, psa.beta)
        lambda_real_new, lambda_r_new = psa_mod.update_lambda(psa, gamma_theta_new, p_theta_new)
        psa_new = PsaState(
            p_theta=p_theta_new,
            gamma_theta=gamma_theta_new,
            lambda_real=lambda_real_new,
            lambda_r=lambda_r_new,
            lambda_min=psa.lambda_min,
            lambda_max=psa.lambda_max,
            alpha=psa.alpha,
            beta=psa.beta,
        )
    else:
        psa_new = psa

    # Step-size correction on the freshly adapted sigma.
    p_sigma_norm = float(np.linalg.norm(p_sigma_new))
    chi_n = core.expected_norm(n)
    if config.variant == "none":
        sigma_post, branch = sigma_csa, BRANCH_SKIPPED
    else:
        proxy_old = mu_proxy_value(config.mu_proxy_mode, state.m, objective)
        proxy_new = mu_proxy_value(config.mu_proxy_mode, m_new, objective)
        rho_old = rho(_rho_inputs(params, n, proxy_old, state.sigma, config))
        params_new = (
            params
            if psa_new.lambda_r == params.lambda_r
            else core.derive_params(psa_new.lambda_r, n)
        )
        rho_new = rho(_rho_inputs(params_new, n, proxy_new, sigma_csa, config))
        if config.variant == "general":
            if correction_ratio(rho_new, rho_old) is None:
                sigma_post, branch = sigma_csa, BRANCH_SKIPPED
            else:
                sigma_post = config.kappa * correct_general(sigma_csa, rho_new, rho_old)
                branch = BRANCH_GENERAL
        else:
            sigma_post, branch = correct_reformulated(
                sigma_csa,
                rho_new,
                rho_old,
                p_sigma_norm,
                chi_n,
                psa_new.lambda_r,
                psa.lambda_r,
                config,
            )

    state_new = DistributionState(m=m_new, sigma=sigma_post, C=C_new, generation=g + 1)

    return GenerationResult(
        state=state_new,
        paths=paths_new,
        psa=psa_new,
        params=params,
        population=pop,
        lambda_real_used=psa.lambda_real,
        lambda_r_used=psa.lambda_r,
        sigma_pre_correction=sigma_csa,
        sigma_post_correction=sigma_post,
        correction_branch=branch,
        p_sigma_norm=p_sigma_norm,
        h_sigma=h_sigma,
        f_best=float(np.min(fitnesses)),
        f_of_mean=float(objective(m_new)),
        n_evals=params.lambda_r,
    )


def collect_violations(result: GenerationResult) -> list[str]:
    """Structural invariant checks after one generation; empty means clean."""
    out: list[str] = []
    state, paths, psa, params = result.state, result.paths, result.psa, result.params
    if np.max(np.abs(state.C - state.C.T)) != 0.0:
        out.append("C not symmetric")
    vals = np.linalg.eigvalsh(state.C)
    if vals[0] <= 0 or vals[0] < core.eigen_floor(state.C) * (1.0 - 1e-9):
        out.append(f"C eigenvalue {vals[0]:g} below floor")
    if state.sigma <= 0:
        out.append(f"sigma {state.sigma:g} not positive")
    if abs(float(np.sum(params.weights)) - 1.0) > 1e-12:
        out.append("weights do not sum to 1")
    if not psa.lambda_min <= psa.lambda_r <= psa.lambda_max:
        out.append(f"lambda_r {psa.lambda_r} outside bounds")
    for name, gamma in (
        ("gamma_sigma", paths.gamma_sigma),
        ("gamma_c", paths.gamma_c),
        ("gamma_theta", psa.gamma_theta),
    ):
        if not 0.0 <= gamma <= 1.0 + 1e-12:
            out.append(f"{name} {gamma:g} outside [0, 1]")
    if result.correction_branch not in (0, 1, 2, 3):
        out.append(f"branch code {result.correction_branch} invalid")
    chi_n = core.expected_norm(state.n)
    if result.correction_branch in (1, 2) and result.p_sigma_norm >= chi_n:
        out.append("branch 1/2 fired with a long step-size path")
    return out
