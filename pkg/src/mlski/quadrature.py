"""Quadrature rules obtained by integrating SKI / MLSKI interpolants exactly.

The weight of a node is the integral of its combination-accumulated cardinal
function; tensor-product cardinals make that a product of stored 1-D
cardinal integrals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce

import numpy as np

from .cardinal1d import CardinalTable
from .grids import DEFAULT_NODE_BUDGET, NodeKey, SparseGrid, combination_terms, get_sparse_grid
from .multilevel import MultilevelInterpolant, mlski_fit
from .ski import Function, _check_table_level, sample_levels

ACCUMULATION_ORDER = "q ascending, multi-index lexicographic, node odometer"


@dataclass(eq=False)
class QuadratureRule:
    n: int
    d: int
    weights: np.ndarray
    grid: SparseGrid = field(repr=False)
    table_digest: str = ""
    accumulation_order: str = ACCUMULATION_ORDER

    @property
    def num_nodes(self) -> int:
        return self.weights.size

    def points(self) -> np.ndarray:
        return self.grid.points(self.n)

    def weights_dict(self) -> dict[NodeKey, float]:
        return dict(zip(self.grid.keys(self.n), self.weights.tolist()))

    def apply(self, values: np.ndarray) -> float:
        """``sum_z w_z values[z]`` for values aligned with the grid's node order."""
        return float(np.dot(self.weights, values[: self.num_nodes]))


def build_rule(n: int, d: int, table: CardinalTable,
               node_budget: int = DEFAULT_NODE_BUDGET) -> QuadratureRule:
    _check_table_level(table, n)
    grid = get_sparse_grid(n, d, node_budget)
    weights = np.zeros(grid.level_size(n))
    for coef, l in combination_terms(n, d):
        tensor = reduce(np.multiply.outer, [table.integral(m) for m in l])
        grid.scatter_add(weights, l, coef * tensor)
    return QuadratureRule(n, d, weights, grid, table.digest)


@lru_cache(maxsize=32)
def cached_rule(n: int, d: int, table: CardinalTable,
                node_budget: int = DEFAULT_NODE_BUDGET) -> QuadratureRule:
    """Rules do not depend on the integrand, so they are reused per (n, d, table)."""
    return build_rule(n, d, table, node_budget)


def integrate_ski(f: Function, n: int, d: int, table: CardinalTable,
                  node_budget: int = DEFAULT_NODE_BUDGET) -> float:
    rule = cached_rule(n, d, table, node_budget)
    return rule.apply(sample_levels(f, rule.grid, n))


@dataclass
class LevelReport:
    level: int
    nodes: int
    estimate: float
    abs_error: float = math.nan
    rel_error: float = math.nan


def multilevel_quadrature(M: MultilevelInterpolant, exact: float | None = None,
                          node_budget: int = DEFAULT_NODE_BUDGET) -> tuple[float, list[LevelReport]]:
    """Integrate a fitted multilevel interpolant, reporting the cumulative estimate per level."""
    total = 0.0
    report = []
    for delta in M.deltas:
        rule = cached_rule(delta.n, M.d, M.table, node_budget)
        total += rule.apply(delta.values)
        row = LevelReport(delta.n, delta.num_nodes, total)
        if exact is not None:
            row.abs_error = abs(total - exact)
            row.rel_error = row.abs_error / abs(exact) if exact != 0 else math.nan
        report.append(row)
    return total, report


def integrate_mlski(f: Function, n0: int, n: int, d: int, table: CardinalTable,
                    exact: float | None = None,
                    node_budget: int = DEFAULT_NODE_BUDGET) -> tuple[float, list[LevelReport]]:
    """MLSKI quadrature of ``f``; residuals vanish at inherited nodes so only new ones contribute."""
    M = mlski_fit(f, n0, n, d, table, node_budget)
    return multilevel_quadrature(M, exact, node_budget)
