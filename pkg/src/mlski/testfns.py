"""Benchmark integrands on [0, 1]^d with known integrals.

Evaluators are vectorised: they take an ``(P, d)`` array and return ``P`` values.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class BenchmarkFunction:
    name: str
    d: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    exact_integral: float | None
    smoothness: str

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ParameterError(f"{self.name} expects points of shape (P, {self.d})")
        return self.evaluator(X)


def bump(X):
    return np.prod(4.0 * X * (1.0 - X), axis=1)


def gauss_product(X):
    return np.exp(-np.sum(X * (1.0 - X), axis=1))


def exp_sum(X):
    return np.exp(np.sum(X, axis=1))


def zero(X):
    return np.zeros(X.shape[0])


def payoff(X):
    return np.sum(np.maximum(X - 0.5, 0.0), axis=1)


def franke4(X):
    x1, x2, x3, x4 = (9.0 * X[:, j] for j in range(4))
    return (
        0.75 * np.exp(-((x1 - 2) ** 2 + (x2 - 2) ** 2 + (x3 - 2) ** 2) / 4 - (x4 - 2) ** 2 / 8)
        + 0.75 * np.exp(-((x1 + 1) ** 2) / 49 - (x2 + 1) ** 2 / 10 - (x3 + 1) ** 2 / 29 - (x4 + 1) ** 2 / 39)
        + 0.5 * np.exp(-((x1 - 7) ** 2) / 4 - (x2 - 3) ** 2 - (x3 - 5) ** 2 / 2 - (x4 - 5) ** 2 / 4)
        - 0.2 * np.exp(-((x1 - 4) ** 2) / 4 - (x2 - 7) ** 2 - (x3 - 5) ** 2 - (x4 - 5) ** 2)
    )


def random_cubic(d: int, seed: int = 7):
    """A fixed dense cubic polynomial in ``d`` variables (coefficients drawn from ``seed``)."""
    rng = np.random.default_rng(seed)
    lin = rng.normal(size=d)
    quad = rng.normal(size=(d, d))
    cub = rng.normal(size=d)
    const = rng.normal()

    def cubic(X):
        return const + X @ lin + np.einsum("pi,ij,pj->p", X, quad, X) + (X**3) @ cub

    exact = const + lin.sum() / 2 + sum(
        quad[i, j] * (1 / 3 if i == j else 1 / 4) for i in range(d) for j in range(d)
    ) + cub.sum() / 4
    return cubic, float(exact)


_FIXED = {
    "f5": BenchmarkFunction("f5", 5, bump, float(Fraction(32, 243)), "analytic tensor product"),
    "g10": BenchmarkFunction("g10", 10, gauss_product, 0.194279067580947, "analytic tensor product"),
    "franke4": BenchmarkFunction("franke4", 4, franke4, 0.037221856819405, "analytic, not a tensor product"),
    "payoff5": BenchmarkFunction("payoff5", 5, payoff, 5 / 8, "kinks at x_i = 1/2"),
}


def _family(name: str, d: int) -> BenchmarkFunction:
    if name == "bump":
        return BenchmarkFunction(name, d, bump, (2 / 3) ** d, "analytic tensor product")
    if name == "expsum":
        return BenchmarkFunction(name, d, exp_sum, (np.e - 1.0) ** d, "analytic tensor product")
    if name == "payoff":
        return BenchmarkFunction(name, d, payoff, d / 8, "kinks at x_i = 1/2")
    if name == "cubic":
        fn, exact = random_cubic(d)
        return BenchmarkFunction(name, d, fn, exact, "polynomial")
    if name == "zero":
        return BenchmarkFunction(name, d, zero, 0.0, "constant")
    raise KeyError(name)


FAMILIES = ("bump", "expsum", "payoff", "cubic", "zero")


def lookup(name: str, d: int | None = None) -> BenchmarkFunction:
    """Fetch a registered benchmark.

    The fixed benchmarks (``f5``, ``g10``, ``franke4``, ``payoff5``) have a
    fixed dimension; the families in `FAMILIES` need ``d``.
    """
    if name in _FIXED:
        fn = _FIXED[name]
        if d is not None and d != fn.d:
            raise ParameterError(f"{name} is defined for d={fn.d}, not d={d}")
        return fn
    if name in FAMILIES:
        if d is None or d < 1:
            raise ParameterError(f"function family {name!r} needs a dimension")
        return _family(name, d)
    raise ParameterError(f"unknown function {name!r}; known: {', '.join(list_all())}")


def list_all() -> list[str]:
    return list(_FIXED) + list(FAMILIES)
