"""Multilevel sparse Gaussian kernel interpolation and quadrature on [0, 1]^d."""

__version__ = "0.1.0"

from .cardinal1d import (
    CardinalTable,
    ShapeConfig,
    erf_hp,
    eval_cardinals,
    generate_table,
    get_table,
    gram_matrix,
    integrate_cardinal,
    load_table,
    save_table,
)
from .grids import (
    GridPoint,
    MultiIndex,
    SparseGrid,
    canonical_key,
    combination_coefficient,
    count_bounded_indices,
    enumerate_nodes,
    sparse_grid,
    sparse_grid_size,
    subgrid_levels,
)
from .multilevel import MultilevelInterpolant, mlski_eval, mlski_fit
from .quadrature import QuadratureRule, build_rule, integrate_mlski, integrate_ski
from .ski import SparseInterpolant, ski_eval, ski_eval_direct, ski_fit
from .testfns import BenchmarkFunction, list_all, lookup
