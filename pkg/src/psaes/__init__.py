"""CMA-ES with population-size adaptation and step-size correction.

The package is organized around one optimizer generation:

- :mod:`psaes.core` holds the search-distribution state and the per-generation
  CMA-ES updates (sampling, ranking, mean / step-size / covariance).
- :mod:`psaes.psa` adapts the population size from an evolution path defined
  over the distribution parameters, normalized by the Gaussian Fisher metric.
- :mod:`psaes.correction` implements the step-size correction: expected
  normal order statistics, the scaling factor rho, the always-on rule, and
  the conditional (reformulated) rule.
- :mod:`psaes.benchmarks` provides the Rastrigin / Schaffer / sphere
  objectives with their domains and initialization protocol.
- :mod:`psaes.experiments` reproduces the forced-schedule, kappa-sweep and
  head-to-head comparison protocols and writes the CSV traces.
- :mod:`psaes.cli` is the command-line entry point.
"""

from psaes.core import (
    DistributionState,
    EvolutionPaths,
    StrategyParams,
    default_lambda,
    derive_params,
    expected_norm,
)
from psaes.benchmarks import get_function

__all__ = [
    "DistributionState",
    "EvolutionPaths",
    "StrategyParams",
    "default_lambda",
    "derive_params",
    "expected_norm",
    "get_function",
]

__version__ = "0.1.0"
