"""Benchmark objective functions and their initialization protocol.

Each objective is a pure map from an n-vector to a scalar, bundled with its
domain box, the interval from which the initial mean is drawn, and the known
optimum.  Domain boxes are informational: the optimizer does not repair
points that leave them unless explicitly asked to.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ObjectiveFunction:
    name: str
    dimension: int
    domain_box: np.ndarray          # (n, 2) per-coordinate [a, b]
    init_interval: tuple[float, float]
    known_optimum_value: float
    known_optimizer: np.ndarray
    evaluate: Callable[[np.ndarray], float] = field(repr=False)

    def __call__(self, x: np.ndarray) -> float:
        return self.evaluate(x)


def rastrigin(x: np.ndarray) -> float:
    """Sum of x_i^2 + 10(1 - cos(2 pi x_i)): many regular local minima."""
    x = np.asarray(x, dtype=float)
    return float(np.sum(x**2 + 10.0 * (1.0 - np.cos(2.0 * np.pi * x))))


def schaffer(x: np.ndarray) -> float:
    """Chained two-coordinate ripple terms; requires at least 2 coordinates."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise ValueError("schaffer needs dimension >= 2")
    r2 = x[:-1] ** 2 + x[1:] ** 2
    return float(np.sum(r2**0.25 * (np.sin(50.0 * r2**0.1) ** 2 + 1.0)))


def sphere(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(x**2))


def _box(n: int, lo: float, hi: float) -> np.ndarray:
    return np.tile(np.array([lo, hi], dtype=float), (n, 1))


def get_function(name: str, dim: int = 2) -> ObjectiveFunction:
    """Look up an objective by name.  Unknown names are a configuration error."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if name == "rastrigin":
        return ObjectiveFunction(
            name="rastrigin",
            dimension=dim,
            domain_box=_box(dim, -10.0, 10.0),
            init_interval=(1.0, 5.0),
            known_optimum_value=0.0,
            known_optimizer=np.zeros(dim),
            evaluate=rastrigin,
        )
    if name == "schaffer":
        if dim < 2:
            raise ValueError("schaffer needs dimension >= 2")
        return ObjectiveFunction(
            name="schaffer",
            dimension=dim,
            domain_box=_box(dim, -100.0, 100.0),
            init_interval=(10.0, 100.0),
            known_optimum_value=0.0,
            known_optimizer=np.zeros(dim),
            evaluate=schaffer,
        )
    if name == "sphere":
        return ObjectiveFunction(
            name="sphere",
            dimension=dim,
            domain_box=_box(dim, -5.0, 5.0),
            init_interval=(-2.0, 2.0),
            known_optimum_value=0.0,
            known_optimizer=np.zeros(dim),
            evaluate=sphere,
        )
    raise KeyError(f"unknown objective {name!r}; expected rastrigin, schaffer or sphere")


def init_state(function: ObjectiveFunction, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Draw the initial mean and step size for a run.

    Each mean coordinate is uniform on the function's initialization interval
    and the step size is half the interval width.
    """
    a0, b0 = function.init_interval
    m0 = rng.uniform(a0, b0, size=function.dimension)
    sigma0 = (b0 - a0) / 2.0
    return m0, sigma0
