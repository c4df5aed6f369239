"""Sparse kernel-based interpolation (SKI) through precomputed cardinal functions.

Fitting a SKI is pure sampling: with tensor-product Gaussian kernels every
sub-grid interpolant is ``sum_i u(x_i) prod_j chi_{l_j, i_j}(x_j)``, so the
combination formula only needs the sampled values and the 1-D tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Callable, Iterable

import numpy as np

from .cardinal1d import CardinalTable, eval_cardinals
from .errors import ConditioningError, ParameterError, TableError
from .grids import (
    DEFAULT_NODE_BUDGET,
    MultiIndex,
    NodeKey,
    SparseGrid,
    block_selector,
    combination_terms,
    get_sparse_grid,
    level_coordinates,
)

# point-batch size times partially contracted tensor size kept below this
_CHUNK_ENTRIES = 1 << 22

Function = Callable[[np.ndarray], np.ndarray]
Terms = list[tuple[MultiIndex, np.ndarray]]


def sample(f: Function, points: np.ndarray) -> np.ndarray:
    """Evaluate a vectorised ``f`` on an ``(P, d)`` array, checking the output shape."""
    vals = np.asarray(f(points), dtype=float)
    if vals.shape != (points.shape[0],):
        raise ParameterError(
            f"function returned shape {vals.shape} for {points.shape[0]} points; "
            "functions must map an (P, d) array to a length-P array"
        )
    return vals


def _check_points(x, d: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    scalar = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != d:
        raise ParameterError(f"points must have {d} coordinates, got {X.shape[1]}")
    if np.any((X < 0.0) | (X > 1.0)) or np.any(np.isnan(X)):
        raise ParameterError("evaluation points must lie in [0, 1]^d")
    return X, scalar


@lru_cache(maxsize=4096)
def transfer(table: CardinalTable, m: int, e: int):
    """Level-``m`` cardinals at the coordinates of effective level ``e``.

    Returns an index array when those coordinates are level-``m`` nodes
    (the cardinal property makes the transfer an exact selection), else a
    dense ``(width(e), 2**m + 1)`` matrix.
    """
    if e <= m:
        return block_selector(e, m)
    return eval_cardinals(table, m, level_coordinates(e))


def apply_transfers(tensor: np.ndarray, ops: list) -> np.ndarray:
    """Mode-wise application of `transfer` results to a sub-grid tensor."""
    out = tensor
    dense = []
    for j, op in enumerate(ops):
        if op.ndim == 1:
            out = np.take(out, op, axis=j)
        else:
            dense.append(j)
    # largest reduction first
    dense.sort(key=lambda j: ops[j].shape[0] / ops[j].shape[1])
    for j in dense:
        out = np.moveaxis(np.tensordot(ops[j], out, axes=(1, j)), 0, j)
    return out


def contract_points(tensor: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
    """``sum_i tensor[i] prod_j mats[j][p, i_j]`` for every point ``p``.

    The dimension with the largest 1-D level is contracted first.
    """
    P = mats[0].shape[0]
    order = sorted(range(tensor.ndim), key=lambda j: -tensor.shape[j])
    T = np.transpose(tensor, order)
    shape = T.shape
    out = mats[order[0]] @ T.reshape(shape[0], -1)
    for k, j in enumerate(order[1:], 1):
        out = np.einsum("pnr,pn->pr", out.reshape(P, shape[k], -1), mats[j])
    return out.reshape(P)


def evaluate_terms(terms: Terms, table: CardinalTable, X: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_l S_l`` for coefficient-scaled sub-grid value tensors at points ``X``.

    Cardinal vectors are computed once per (dimension, level) for the whole
    batch and reused by every sub-grid sharing that pair.
    """
    P, d = X.shape
    out = np.zeros(P)
    if not terms or P == 0:
        return out
    widest = max(t.size // max(t.shape) for _, t in terms)
    step = max(1, _CHUNK_ENTRIES // max(widest, 1))
    for start in range(0, P, step):
        Xc = X[start:start + step]
        cache: dict[tuple[int, int], np.ndarray] = {}
        acc = np.zeros(Xc.shape[0])
        for l, tensor in terms:
            mats = []
            for j, m in enumerate(l):
                if (j, m) not in cache:
                    cache[j, m] = eval_cardinals(table, m, Xc[:, j])
                mats.append(cache[j, m])
            acc += contract_points(tensor, mats)
        out[start:start + step] = acc
    return out


@dataclass(eq=False)
class SparseInterpolant:
    """Sampled values on the sparse grid of level ``n`` plus the table to evaluate them.

    ``values`` is aligned with the node order of ``grid`` (which may be a
    finer grid whose level-``n`` prefix is used).
    """

    n: int
    d: int
    values: np.ndarray
    table: CardinalTable
    grid: SparseGrid = field(repr=False)

    def __post_init__(self):
        if self.values.shape != (self.grid.level_size(self.n),):
            raise ParameterError("values do not cover the sparse grid")

    @property
    def num_nodes(self) -> int:
        return self.values.size

    def keys(self) -> Iterable[NodeKey]:
        return self.grid.keys(self.n)

    def value_at(self, key: NodeKey) -> float:
        idx = self.grid.index_of(key)
        if idx >= self.num_nodes:
            raise KeyError(key)
        return float(self.values[idx])

    def as_dict(self) -> dict[NodeKey, float]:
        return dict(zip(self.keys(), self.values.tolist()))

    def terms(self, reverse: bool = False) -> Terms:
        """Coefficient-scaled value tensors of every sub-grid in the combination."""
        combo = combination_terms(self.n, self.d)
        if reverse:
            combo = combo[::-1]
        return [(l, coef * self.grid.gather(self.values, l)) for coef, l in combo]

    def __call__(self, x) -> np.ndarray | float:
        return ski_eval(self, x)


def _check_table_level(table: CardinalTable, n: int) -> None:
    if n > table.L_max:
        raise TableError(f"level {n} needs 1-D level {n}, table only has L_max={table.L_max}")


def sample_levels(f: Function, grid: SparseGrid, k: int) -> np.ndarray:
    """Sample ``f`` once at every node of the nested level-``k`` sparse grid, block by block."""
    values = np.empty(grid.level_size(k))
    for e in grid.blocks:
        sl = grid.block_slice(e)
        if sl.start >= values.size:
            break
        values[sl] = sample(f, grid.block_points(e))
    return values


def ski_fit(f: Function, n: int, d: int, table: CardinalTable,
            node_budget: int = DEFAULT_NODE_BUDGET) -> SparseInterpolant:
    """Sample a vectorised ``f`` on the sparse grid of level ``n``; no linear solves."""
    _check_table_level(table, n)
    grid = get_sparse_grid(n, d, node_budget)
    return SparseInterpolant(n, d, sample_levels(f, grid, n), table, grid)


def ski_eval(S: SparseInterpolant, x, reverse: bool = False):
    """Evaluate the combination formula at one point (shape ``(d,)``) or many (``(P, d)``)."""
    X, scalar = _check_points(x, S.d)
    out = evaluate_terms(S.terms(reverse=reverse), S.table, X)
    return float(out[0]) if scalar else out


def _dense_subgrid_interpolant(f: Function, l: MultiIndex, c: float, X: np.ndarray,
                               cond_limit: float) -> np.ndarray:
    axes = [np.arange(s) / (s - 1) for s in l.shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    scale = 2.0 ** np.array(l.levels)

    def kernel(A, B):
        diff = (A[:, None, :] - B[None, :, :]) * scale
        return np.exp(-(c**2) * np.sum(diff**2, axis=-1))

    K = kernel(nodes, nodes)
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > cond_limit:
        raise ConditioningError(f"collocation matrix for {l.levels} has condition {cond:.3e}")
    coeffs = np.linalg.solve(K, sample(f, nodes))
    return kernel(X, nodes) @ coeffs


def ski_eval_direct(f: Function, n: int, d: int, c: float, x,
                    max_nodes: int = 20000, cond_limit: float = 1e12):
    """Reference SKI that solves every anisotropic Gaussian collocation system densely.

    Independent of the cardinal tables; meant for cross-checking small cases.
    """
    X, scalar = _check_points(x, d)
    combo = combination_terms(n, d)
    total = sum(l.num_points for _, l in combo)
    if total > max_nodes:
        raise ParameterError(f"direct SKI limited to {max_nodes} nodes, needs {total}")
    out = np.zeros(X.shape[0])
    for coef, l in combo:
        out += coef * _dense_subgrid_interpolant(f, l, c, X, cond_limit)
    return float(out[0]) if scalar else out


def outer_all(vectors: list[np.ndarray]) -> np.ndarray:
    return reduce(np.multiply.outer, vectors)


def max_node_error(S: SparseInterpolant, f: Function) -> float:
    """Largest ``|S(z) - f(z)|`` over the nodes ``z`` of the interpolant's sparse grid."""
    pts = S.grid.points(S.n)
    return float(np.max(np.abs(ski_eval(S, pts) - sample(f, pts)))) if len(pts) else math.nan
