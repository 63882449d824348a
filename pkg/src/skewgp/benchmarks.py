"""Benchmark objectives for the optimisation experiments.

All functions are MAXIMIZED; the classical minimization test functions
(six-hump camel, Langermann, Colville, Rosenbrock, Hartmann) are
sign-flipped from their standard published forms, which are written out
below since their parameterizations vary across sources.  ``optimum``
holds the known maximum where available (None for Langermann: with this
A/c parameterization we use it trend-only).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class BenchmarkFunction:
    name: str
    dimension: int
    lower: np.ndarray
    upper: np.ndarray
    evaluate: Callable[[np.ndarray], float]
    optimum: float | None = None

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != (self.dimension,) or upper.shape != (self.dimension,):
            raise InputError("domain box must match the dimension")

    def __call__(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.evaluate(x))


def _one_d(x):
    return np.cos(5.0 * x[0]) + np.exp(-0.5 * x[0] ** 2)


def _six_hump_camel(x):
    x1, x2 = x
    f = (
        (4.0 - 2.1 * x1**2 + x1**4 / 3.0) * x1**2
        + x1 * x2
        + (-4.0 + 4.0 * x2**2) * x2**2
    )
    return -f


_LANGERMANN_A = np.array(
    [[3.0, 5.0], [5.0, 2.0], [2.0, 1.0], [1.0, 4.0], [7.0, 9.0]]
)
_LANGERMANN_C = np.array([1.0, 2.0, 5.0, 2.0, 3.0])


def _langermann(x):
    # f(x) = sum_i c_i exp(-||x - a_i||^2 / pi) cos(pi ||x - a_i||^2)
    sq = np.sum((x[None, :] - _LANGERMANN_A) ** 2, axis=1)
    f = np.sum(_LANGERMANN_C * np.exp(-sq / np.pi) * np.cos(np.pi * sq))
    return -f


def _colville(x):
    x1, x2, x3, x4 = x
    f = (
        100.0 * (x1**2 - x2) ** 2
        + (x1 - 1.0) ** 2
        + (x3 - 1.0) ** 2
        + 90.0 * (x3**2 - x4) ** 2
        + 10.1 * ((x2 - 1.0) ** 2 + (x4 - 1.0) ** 2)
        + 19.8 * (x2 - 1.0) * (x4 - 1.0)
    )
    return -f


def _rosenbrock5(x):
    f = np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2)
    return -f


_HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
        [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
        [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
        [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
    ]
)


def _hartmann6(x):
    inner = np.sum(_HARTMANN6_A * (x[None, :] - _HARTMANN6_P) ** 2, axis=1)
    f = -np.sum(_HARTMANN6_ALPHA * np.exp(-inner))
    return -f


BENCHMARKS: dict[str, BenchmarkFunction] = {
    "oneD": BenchmarkFunction(
        "oneD", 1, [-2.6], [2.6], _one_d, optimum=2.0
    ),
    "sixhumpcamel": BenchmarkFunction(
        "sixhumpcamel", 2, [-3.0, -2.0], [3.0, 2.0], _six_hump_camel,
        optimum=1.0316284535,
    ),
    "langer": BenchmarkFunction(
        "langer", 2, [0.0, 0.0], [10.0, 10.0], _langermann, optimum=None
    ),
    "colville": BenchmarkFunction(
        "colville", 4, [-10.0] * 4, [10.0] * 4, _colville, optimum=0.0
    ),
    "rosenbrock5": BenchmarkFunction(
        "rosenbrock5", 5, [-2.048] * 5, [2.048] * 5, _rosenbrock5, optimum=0.0
    ),
    "hartman6": BenchmarkFunction(
        "hartman6", 6, [0.0] * 6, [1.0] * 6, _hartmann6, optimum=3.32236801
    ),
}


def get_benchmark(name: str) -> BenchmarkFunction:
    if name not in BENCHMARKS:
        raise InputError(
            f"unknown benchmark {name!r}; available: {sorted(BENCHMARKS)}"
        )
    return BENCHMARKS[name]
