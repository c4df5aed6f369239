"""Multilevel SKI: interpolate residuals on nested sparse grids and sum the corrections."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cardinal1d import CardinalTable
from .errors import ParameterError
from .grids import DEFAULT_NODE_BUDGET, MultiIndex, SparseGrid, get_sparse_grid
from .ski import (
    Function,
    SparseInterpolant,
    Terms,
    _check_points,
    _check_table_level,
    apply_transfers,
    evaluate_terms,
    sample,
    sample_levels,
    transfer,
)


@dataclass(eq=False)
class MultilevelInterpolant:
    n0: int
    n: int
    d: int
    deltas: list[SparseInterpolant]
    table: CardinalTable
    # max |residual| at nodes inherited from coarser levels, filled only when verified
    old_node_residuals: dict[int, float] = field(default_factory=dict)

    @property
    def grid(self) -> SparseGrid:
        return self.deltas[-1].grid

    @property
    def num_nodes(self) -> int:
        return self.deltas[-1].num_nodes

    def terms(self) -> Terms:
        """Sub-grid tensors of all corrections merged per multi-index."""
        return list(_accumulate(self.deltas).items())

    def __call__(self, x):
        return mlski_eval(self, x)


def _accumulate(deltas: list[SparseInterpolant], acc: dict[MultiIndex, np.ndarray] | None = None):
    acc = {} if acc is None else acc
    for delta in deltas:
        for l, tensor in delta.terms():
            if l in acc:
                acc[l] += tensor
            else:
                acc[l] = tensor.copy()
    return acc


def evaluate_on_block(acc: dict[MultiIndex, np.ndarray], table: CardinalTable, e) -> np.ndarray:
    """Sum of the accumulated sub-grid interpolants at every node of block ``e``."""
    out = np.zeros(SparseGrid.block_shape(e))
    for l, tensor in acc.items():
        out += apply_transfers(tensor, [transfer(table, m, v) for m, v in zip(l, e)])
    return out.ravel()


def mlski_fit(f: Function, n0: int, n: int, d: int, table: CardinalTable,
              node_budget: int = DEFAULT_NODE_BUDGET, verify_nested: bool = False) -> MultilevelInterpolant:
    """Fit the multilevel interpolant from level ``n0`` up to ``n``.

    At level ``k > n0`` the residual is only evaluated at nodes that are new
    in the level-``k`` sparse grid; inherited nodes are stored as exact
    zeros.  With ``verify_nested`` the inherited residuals are recomputed and
    their maxima recorded in ``old_node_residuals``.
    """
    if not 1 <= n0 <= n:
        raise ParameterError(f"need 1 <= n0 <= n, got n0={n0}, n={n}")
    _check_table_level(table, n)
    grid = get_sparse_grid(n, d, node_budget)
    deltas = [SparseInterpolant(n0, d, sample_levels(f, grid, n0), table, grid)]
    acc = _accumulate(deltas)
    model = MultilevelInterpolant(n0, n, d, deltas, table)
    for k in range(n0 + 1, n + 1):
        values = np.zeros(grid.level_size(k))
        for e in grid.blocks_of_level(k):
            sl = grid.block_slice(e)
            values[sl] = sample(f, grid.block_points(e)) - evaluate_on_block(acc, table, e)
        if verify_nested:
            worst = 0.0
            for e in grid.blocks:
                if sum(e) >= k + d - 1:
                    break
                r = sample(f, grid.block_points(e)) - evaluate_on_block(acc, table, e)
                worst = max(worst, float(np.max(np.abs(r))))
            model.old_node_residuals[k] = worst
        delta = SparseInterpolant(k, d, values, table, grid)
        deltas.append(delta)
        _accumulate([delta], acc)
    return model


def mlski_eval(M: MultilevelInterpolant, x):
    """Sum of all corrections at one point or a batch of points."""
    X, scalar = _check_points(x, M.d)
    out = evaluate_terms(M.terms(), M.table, X)
    return float(out[0]) if scalar else out
