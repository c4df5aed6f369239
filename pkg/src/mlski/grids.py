"""Multi-indices, directionally uniform sub-grids and sparse grids on [0, 1]^d.

A point of any dyadic grid is identified by its *effective level* per
dimension, ``e = max(tau, 1)`` where ``tau`` is the exponent of the reduced
denominator of the coordinate.  Coordinates 0, 1/2 and 1 all have effective
level 1; an odd multiple of ``2**-e`` (``e >= 2``) has effective level ``e``.
A point belongs to the sparse grid of level ``n`` exactly when
``sum(e) <= n + d - 1``.

`SparseGrid` stores nodes in *blocks*: all points sharing the same
effective-level vector form a tensor-product block, and blocks are ordered
by ``(|e|_1, lexicographic e)``.  Because of that order the sparse grid of
level ``k`` is a prefix of the sparse grid of level ``k + 1``, so a single
flat array indexes every nested level.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb, prod
from typing import Iterator, Sequence

import numpy as np

from .errors import BudgetExceededError, ParameterError

DEFAULT_NODE_BUDGET = 2**31

NodeKey = tuple[tuple[int, int], ...]


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Level vector ``l`` of a directionally uniform grid with spacing ``2**-l``."""

    levels: tuple[int, ...]

    def __post_init__(self):
        levels = tuple(int(v) for v in self.levels)
        if not levels:
            raise ParameterError("a multi-index needs at least one component")
        if min(levels) < 1:
            raise ParameterError(f"multi-index components must be >= 1, got {levels}")
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self) -> Iterator[int]:
        return iter(self.levels)

    def __getitem__(self, j: int) -> int:
        return self.levels[j]

    @property
    def norm(self) -> int:
        return sum(self.levels)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(2**v + 1 for v in self.levels)

    @property
    def num_points(self) -> int:
        return prod(self.shape)


@dataclass(frozen=True)
class GridPoint:
    level: MultiIndex
    index: tuple[int, ...]

    @property
    def coords(self) -> tuple[float, ...]:
        return tuple(i / 2**m for i, m in zip(self.index, self.level))


def compositions(total: int, parts: int, minimum: int = 1) -> Iterator[tuple[int, ...]]:
    """Yield all tuples of ``parts`` integers >= minimum summing to ``total``, lexicographically."""
    if parts == 1:
        if total >= minimum:
            yield (total,)
        return
    for first in range(minimum, total - minimum * (parts - 1) + 1):
        for rest in compositions(total - first, parts - 1, minimum):
            yield (first,) + rest


def _check_dims(n: int, d: int) -> None:
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if n < 1:
        raise ParameterError(f"level must be >= 1, got {n}")


def subgrid_levels(n: int, d: int, q: int) -> list[MultiIndex]:
    """Multi-indices with ``|l|_1 = n + d - 1 - q`` in lexicographic order."""
    _check_dims(n, d)
    if not 0 <= q <= d - 1:
        raise ParameterError(f"q must lie in [0, {d - 1}], got {q}")
    total = n + d - 1 - q
    if total < d:
        return []
    return [MultiIndex(c) for c in compositions(total, d)]


def combination_coefficient(q: int, d: int) -> int:
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if not 0 <= q <= d - 1:
        raise ParameterError(f"q must lie in [0, {d - 1}], got {q}")
    return (-1) ** q * comb(d - 1, q)


def combination_terms(n: int, d: int) -> list[tuple[int, MultiIndex]]:
    """``(coefficient, l)`` pairs of the combination formula, q ascending then lexicographic."""
    return [
        (combination_coefficient(q, d), l)
        for q in range(d)
        for l in subgrid_levels(n, d, q)
    ]


def enumerate_nodes(l: MultiIndex, node_budget: int = DEFAULT_NODE_BUDGET) -> Iterator[GridPoint]:
    """Yield every point of the grid ``X_l``, last dimension varying fastest."""
    if l.num_points > node_budget:
        raise BudgetExceededError(
            f"grid {l.levels} has {l.num_points} nodes, budget is {node_budget}"
        )
    for index in itertools.product(*(range(s) for s in l.shape)):
        yield GridPoint(l, index)


def reduce_dyadic(i: int, m: int) -> tuple[int, int]:
    """Reduce ``i / 2**m`` to lowest terms ``(tau, num)``."""
    while m > 0 and i % 2 == 0:
        i //= 2
        m -= 1
    if m == 0:
        # i is now the integer coordinate 0 or 1
        return 0, i
    return m, i


def canonical_key(p: GridPoint) -> NodeKey:
    return tuple(reduce_dyadic(i, m) for i, m in zip(p.index, p.level))


def count_bounded_indices(k: Sequence[int], p: int) -> int:
    """Number of ``j`` in N^d with ``j >= k`` componentwise and ``|j|_1 = p``."""
    k = tuple(k) if not isinstance(k, int) else (k,)
    s = sum(k)
    if s > p:
        return 0
    d = len(k)
    return comb(p - s + d - 1, d - 1)


def level_width(e: int) -> int:
    """Number of 1-D coordinates whose effective level is exactly ``e``."""
    return 3 if e == 1 else 2 ** (e - 1)


def level_numerators(e: int) -> np.ndarray:
    """Numerators over ``2**e`` of the 1-D coordinates with effective level ``e``, ascending."""
    if e == 1:
        return np.array([0, 1, 2])
    return np.arange(1, 2**e, 2)


def level_coordinates(e: int) -> np.ndarray:
    return level_numerators(e) / 2.0**e


def block_selector(e: int, m: int) -> np.ndarray:
    """Positions in the level-``m`` 1-D grid of the coordinates with effective level ``e``."""
    if e > m:
        raise ParameterError(f"effective level {e} is not contained in level {m}")
    return level_numerators(e) * 2 ** (m - e)


def sparse_grid_size(n: int, d: int) -> int:
    """Closed-form ``|sparse_grid(n, d)|`` without materialising any node."""
    _check_dims(n, d)
    top = n + d - 1
    # coefficients of the per-dimension generating polynomial sum_e width(e) t^e
    poly = [0] + [level_width(e) for e in range(1, top + 1)]
    acc = [1] + [0] * top
    for _ in range(d):
        nxt = [0] * (top + 1)
        for a, ca in enumerate(acc):
            if ca:
                for b in range(1, top - a + 1):
                    nxt[a + b] += ca * poly[b]
        acc = nxt
    return sum(acc)


class SparseGrid:
    """Block-indexed node set of the sparse grid of level ``n`` in ``d`` dimensions."""

    def __init__(self, n: int, d: int, node_budget: int = DEFAULT_NODE_BUDGET):
        _check_dims(n, d)
        self.n = n
        self.d = d
        size = sparse_grid_size(n, d)
        if size > node_budget:
            raise BudgetExceededError(
                f"sparse grid (n={n}, d={d}) has {size} nodes, budget is {node_budget}"
            )
        self.blocks: list[tuple[int, ...]] = []
        self.offsets: dict[tuple[int, ...], int] = {}
        self._level_ends: list[int] = []
        offset = 0
        for total in range(d, n + d):
            for e in compositions(total, d):
                self.blocks.append(e)
                self.offsets[e] = offset
                offset += prod(level_width(v) for v in e)
            self._level_ends.append(offset)
        self.size = offset
        assert self.size == size

    def __len__(self) -> int:
        return self.size

    def level_size(self, k: int) -> int:
        """Number of nodes of the nested sparse grid of level ``k <= n``."""
        if not 1 <= k <= self.n:
            raise ParameterError(f"level {k} outside 1..{self.n}")
        return self._level_ends[k - 1]

    def blocks_of_level(self, k: int) -> list[tuple[int, ...]]:
        """Blocks that are new at level ``k`` (``|e|_1 = k + d - 1``)."""
        return [e for e in self.blocks if sum(e) == k + self.d - 1]

    @staticmethod
    def block_shape(e: Sequence[int]) -> tuple[int, ...]:
        return tuple(level_width(v) for v in e)

    def block_slice(self, e: Sequence[int]) -> slice:
        e = tuple(e)
        start = self.offsets[e]
        return slice(start, start + prod(self.block_shape(e)))

    def block_points(self, e: Sequence[int]) -> np.ndarray:
        """Coordinates of the block's nodes, shape ``(size, d)``, in storage order."""
        axes = [level_coordinates(v) for v in e]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def points(self, k: int | None = None) -> np.ndarray:
        k = self.n if k is None else k
        end = self.level_size(k)
        out = [self.block_points(e) for e in self.blocks if self.offsets[e] < end]
        return np.concatenate(out, axis=0)

    def keys(self, k: int | None = None) -> Iterator[NodeKey]:
        """Canonical keys of all nodes in storage order."""
        k = self.n if k is None else k
        end = self.level_size(k)
        for e in self.blocks:
            if self.offsets[e] >= end:
                break
            per_dim = []
            for v in e:
                nums = level_numerators(v)
                if v == 1:
                    per_dim.append([(0, 0), (1, 1), (0, 1)])
                else:
                    per_dim.append([(v, int(u)) for u in nums])
            yield from itertools.product(*per_dim)

    def index_of(self, key: NodeKey) -> int:
        if len(key) != self.d:
            raise ParameterError(f"key has {len(key)} components, grid has {self.d}")
        e = tuple(max(tau, 1) for tau, _ in key)
        if e not in self.offsets:
            raise KeyError(key)
        local = 0
        for (tau, num), v in zip(key, e):
            pos = (num * 2 if tau == 0 else 1) if v == 1 else (num - 1) // 2
            local = local * level_width(v) + pos
        return self.offsets[e] + local

    def sub_blocks(self, l: MultiIndex) -> Iterator[tuple[tuple[int, ...], tuple[np.ndarray, ...]]]:
        """Blocks contained in ``X_l`` with their positions inside the ``X_l`` tensor."""
        for e in itertools.product(*(range(1, v + 1) for v in l)):
            yield e, tuple(block_selector(v, m) for v, m in zip(e, l))

    def gather(self, values: np.ndarray, l: MultiIndex) -> np.ndarray:
        """Arrange the stored values of the nodes of ``X_l`` as a tensor of shape ``l.shape``."""
        if l.norm > self.n + self.d - 1:
            raise ParameterError(f"grid {l.levels} is not part of sparse grid level {self.n}")
        out = np.empty(l.shape)
        for e, sel in self.sub_blocks(l):
            sl = self.block_slice(e)
            out[np.ix_(*sel)] = values[sl].reshape(self.block_shape(e))
        return out

    def scatter_add(self, target: np.ndarray, l: MultiIndex, tensor: np.ndarray) -> None:
        """Add a tensor over ``X_l`` into the flat per-node array ``target``."""
        for e, sel in self.sub_blocks(l):
            sl = self.block_slice(e)
            target[sl] += tensor[np.ix_(*sel)].ravel()


@lru_cache(maxsize=32)
def get_sparse_grid(n: int, d: int, node_budget: int = DEFAULT_NODE_BUDGET) -> SparseGrid:
    return SparseGrid(n, d, node_budget)


def sparse_grid(n: int, d: int, node_budget: int = DEFAULT_NODE_BUDGET) -> set[NodeKey]:
    """Canonical keys of the union of all ``X_l`` with ``|l|_1 = n + d - 1``."""
    return set(get_sparse_grid(n, d, node_budget).keys())
