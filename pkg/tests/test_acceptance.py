"""Acceptance suite: one group of checks per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints a
PASS/FAIL line per criterion together with the emitted error tables.
"""
import itertools
import time
from collections import defaultdict

import numpy as np
import pytest
from scipy import integrate

from mlski.cardinal1d import ShapeConfig, eval_cardinals, generate_table, save_table, table_filename
from mlski.cli import main
from mlski.grids import count_bounded_indices, sparse_grid_size
from mlski.multilevel import mlski_eval, mlski_fit
from mlski.quadrature import integrate_mlski, integrate_ski
from mlski.ski import max_node_error, ski_eval, ski_eval_direct, ski_fit
from mlski.testfns import lookup

from oracles import refined_cube_integral

DETAILS = defaultdict(list)

# node columns of the four published error tables: (label, d, first level, counts)
NODE_TABLES = [
    ("f5", 5, 1, [243, 1053, 3753, 12033, 36033, 102785, 282525, 754845]),
    ("g10", 10, 1, [59049, 452709, 2421009, 10819089]),
    ("franke4", 4, 1, [81, 297, 945, 2769, 7681, 20481, 52993, 133889, 331777]),
    ("payoff5", 5, 1, [243, 1053, 3753, 12033, 36033, 102785, 282525, 754845]),
]
NODE_CASES = [
    pytest.param(d, n0 + k, count, id=f"{label}-level{n0 + k}")
    for label, d, n0, counts in NODE_TABLES
    for k, count in enumerate(counts)
]

# published relative errors used by the soft reproduction check
PUBLISHED_REL = {
    "f5": [2.2850e-1, 3.8904e-2, 9.8818e-3, 1.1335e-3, 2.7439e-4, 2.6222e-5],
    "franke4": [4.4055e-1, 3.4216e-1, 2.1253e-1, 1.4751e-1, 1.4998e-2, 3.4959e-3, 4.3643e-4],
    "payoff5": [2.4206e-1, 8.6851e-3, 4.7529e-3, 1.6206e-3, 5.1390e-4, 1.4511e-4],
    "g10": [7.7556e-1, 2.9933e-2, 1.8469e-2],
}
# shape parameter backed out from the level-1 rows, which depend on c only
MATCHED_SHAPE = {"f5": 0.5441, "franke4": 0.5441, "payoff5": 0.5441, "g10": 1.0}

FUNCTIONS = ["expsum", "bump", "cubic"]


def criterion(number, title):
    return pytest.mark.criterion(number, title)


@pytest.fixture(scope="module")
def matched_table():
    return generate_table(ShapeConfig(MATCHED_SHAPE["f5"], 7, 80), workers=4)


@criterion(1, "node-count goldens")
@pytest.mark.parametrize("d,n,count", NODE_CASES)
def test_node_counts(d, n, count):
    start = time.perf_counter()
    size = sparse_grid_size(n, d)
    assert time.perf_counter() - start < 5
    if size != count:
        DETAILS[1].append(f"d={d} level {n}: computed {size}, published {count}")
    assert size == count


@criterion(2, "interpolation exactness at the nodes")
@pytest.mark.parametrize("d,n", [(2, 4), (3, 3), (5, 2)])
@pytest.mark.parametrize("name", FUNCTIONS)
def test_interpolation_property(table, d, n, name):
    start = time.perf_counter()
    f = lookup(name, d)
    ski_err = max_node_error(ski_fit(f, n, d, table), f)
    M = mlski_fit(f, 1, n, d, table)
    pts = M.grid.points(n)
    ml_err = float(np.abs(mlski_eval(M, pts) - f(pts)).max())
    DETAILS[2].append(f"{name} d={d} n={n}: SKI {ski_err:.2e}, MLSKI {ml_err:.2e}")
    assert ski_err <= 1e-8
    assert ml_err <= 5e-8
    assert time.perf_counter() - start < 60


@criterion(3, "bounded-index count against enumeration")
def test_bounded_count_exhaustive():
    start = time.perf_counter()
    checked = 0
    for d in range(1, 5):
        for p in range(1, 15):
            J = np.array([j for j in itertools.product(range(1, p + 1), repeat=d) if sum(j) == p])
            for k in itertools.product(range(1, 5), repeat=d):
                brute = int(np.all(J >= np.array(k), axis=1).sum()) if J.size else 0
                assert count_bounded_indices(k, p) == brute, (k, p)
                checked += 1
    DETAILS[3].append(f"{checked} (k, p) pairs checked")
    assert time.perf_counter() - start < 60


@criterion(4, "cardinal tables")
def test_cardinal_tables():
    start = time.perf_counter()
    tab = generate_table(ShapeConfig(1.0, 5, 80))
    worst_delta = 0.0
    worst_quad = 0.0
    for m in range(1, 6):
        assert tab.residuals[m - 1] <= 1e-13
        nodes = np.arange(2**m + 1) / 2**m
        worst_delta = max(worst_delta, np.abs(eval_cardinals(tab, m, nodes) - np.eye(2**m + 1)).max())
        if m <= 4:
            for i in range(2**m + 1):
                val, _ = integrate.quad(lambda y: float(eval_cardinals(tab, m, y)[i]), 0, 1,
                                        points=nodes[1:-1], epsabs=1e-14, epsrel=1e-13, limit=500)
                worst_quad = max(worst_quad, abs(val - tab.integral(m)[i]))
    elapsed = time.perf_counter() - start
    DETAILS[4].append(f"max residual {max(tab.residuals):.2e}, node delta {worst_delta:.2e}, "
                      f"integral vs quadrature {worst_quad:.2e}, {elapsed:.1f} s")
    assert worst_delta <= 1e-10
    assert worst_quad <= 1e-12
    assert elapsed < 60


@criterion(4, "cardinal tables")
def test_full_table_generation():
    start = time.perf_counter()
    tab = generate_table(ShapeConfig(1.0, 7, 80), workers=4)
    elapsed = time.perf_counter() - start
    DETAILS[4].append(f"L_max=7 generation {elapsed:.1f} s, max residual {max(tab.residuals):.2e}")
    assert max(tab.residuals) <= 1e-13
    assert elapsed < 600


@criterion(5, "fast path against dense direct solves")
@pytest.mark.parametrize("d,n", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
def test_direct_equivalence(table, d, n):
    start = time.perf_counter()
    f = lookup("expsum", d)
    X = np.random.default_rng(2024 + d * 10 + n).random((50, d))
    diff = float(np.abs(ski_eval(ski_fit(f, n, d, table), X) - ski_eval_direct(f, n, d, 1.0, X)).max())
    DETAILS[5].append(f"d={d} n={n}: {diff:.2e}")
    assert diff <= 1e-8
    assert time.perf_counter() - start < 60


@criterion(6, "quadrature against dense quadrature of the interpolant")
def test_quadrature_oracle(table):
    start = time.perf_counter()
    f = lookup("expsum", 2)
    S = ski_fit(f, 3, 2, table)
    ski_diff = abs(integrate_ski(f, 3, 2, table) - refined_cube_integral(lambda X: ski_eval(S, X), 2))
    M = mlski_fit(f, 1, 3, 2, table)
    total, _ = integrate_mlski(f, 1, 3, 2, table)
    ml_diff = abs(total - refined_cube_integral(lambda X: mlski_eval(M, X), 2))
    DETAILS[6].append(f"SKI {ski_diff:.2e}, MLSKI {ml_diff:.2e}")
    assert ski_diff <= 1e-8
    assert ml_diff <= 1e-7
    assert time.perf_counter() - start < 120


def _error_table(name, table, n):
    fn = lookup(name)
    _, report = integrate_mlski(fn, 1, n, fn.d, table, exact=fn.exact_integral)
    DETAILS[7].append(f"{name} (c={table.c}): level, nodes, abs error, rel error, published rel error")
    for r, published in zip(report, PUBLISHED_REL[name]):
        DETAILS[7].append(f"  {r.level}, {r.nodes}, {r.abs_error:.4e}, {r.rel_error:.4e}, {published:.4e}")
    return [r.rel_error for r in report]


def _non_increasing_with_one_plateau(errors):
    return sum(b >= a for a, b in zip(errors, errors[1:])) <= 1


@criterion(7, "published error tables (soft)")
@pytest.mark.parametrize("name,n", [("f5", 6), ("franke4", 7), ("payoff5", 6)])
def test_matched_tables(matched_table, name, n):
    start = time.perf_counter()
    assert matched_table.c == MATCHED_SHAPE[name]
    errors = _error_table(name, matched_table, n)
    ratio = errors[-1] / PUBLISHED_REL[name][n - 1]
    DETAILS[7].append(f"  level-{n} ratio to published {ratio:.3g}")
    assert _non_increasing_with_one_plateau(errors)
    assert 1e-2 <= ratio <= 1e2
    assert time.perf_counter() - start < 900


@criterion(7, "published error tables (soft)")
def test_g10_desk_scale(table):
    errors = _error_table("g10", table, 3)
    assert errors[-1] < 1e-1
    for got, published in zip(errors[1:], PUBLISHED_REL["g10"][1:]):
        assert 1e-2 <= got / published <= 1e2


@criterion(8, "determinism")
def test_determinism(table, tmp_path, monkeypatch):
    monkeypatch.setenv("MLSKI_TABLE_DIR", str(tmp_path))
    save_table(table, tmp_path / table_filename(1.0, 7))
    outputs = []
    for run in range(2):
        tab = tmp_path / f"gen{run}.mlsk1"
        csv = tmp_path / f"out{run}.csv"
        assert main(["gen-tables", "--level-max", "5", "--digits", "60", "--out", str(tab)]) == 0
        assert main(["integrate", "--function", "payoff5", "--level-max", "3", "--out", str(csv)]) == 0
        outputs.append((tab.read_bytes(), csv.read_bytes()))
    assert outputs[0] == outputs[1]
