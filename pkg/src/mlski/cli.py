"""Command-line harness: table generation, integration and interpolation studies, node counts.

Exit codes: 0 success, 2 parameter error, 3 table error, 4 node budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from . import __version__
from .cardinal1d import CardinalTable, ShapeConfig, generate_table, load_table, save_table, table_filename
from .errors import BudgetExceededError, MLSKIError, ParameterError, TableError
from .grids import DEFAULT_NODE_BUDGET, sparse_grid_size
from .multilevel import MultilevelInterpolant, mlski_eval, mlski_fit
from .quadrature import multilevel_quadrature
from .testfns import lookup

log = logging.getLogger("mlski")

EXIT_OK, EXIT_PARAM, EXIT_TABLE, EXIT_BUDGET = 0, 2, 3, 4
# fits above this many nodes need --allow-large (10-D level 4 has 10.8M)
LARGE_RUN_NODES = 5_000_000


@dataclass
class RunConfig:
    command: str
    dim: int | None = None
    n0: int = 1
    n: int = 1
    c: float = 1.0
    table: str | None = None
    function: str | None = None
    samples: int = 1000
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    node_budget: int = DEFAULT_NODE_BUDGET
    threads: int = 1
    allow_large: bool = False
    digits: int = 80

    def validate(self) -> None:
        if self.dim is not None and not 1 <= self.dim <= 10:
            raise ParameterError(f"--dim must lie in [1, 10], got {self.dim}")
        if self.command == "gen-tables":
            ShapeConfig(self.c, self.n, self.digits)
            return
        if self.n0 < 1 or self.n < self.n0:
            raise ParameterError(f"need 1 <= --level-min <= --level-max, got {self.n0}, {self.n}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ParameterError(f"--shape must be positive, got {self.c}")
        if self.samples < 1:
            raise ParameterError("--samples must be positive")
        if self.threads < 1:
            raise ParameterError("--threads must be positive")
        if self.format not in ("csv", "json"):
            raise ParameterError(f"unknown format {self.format!r}")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int)
    common.add_argument("--level-min", dest="n0", type=int, default=1)
    common.add_argument("--level-max", dest="n", type=int)
    common.add_argument("--shape", dest="c", type=float, default=1.0)
    common.add_argument("--table")
    common.add_argument("--function")
    common.add_argument("--samples", type=int, default=1000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    common.add_argument("--allow-large", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mlski", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    gen = sub.add_parser("gen-tables", parents=[common], help="generate a cardinal table file")
    gen.add_argument("--digits", type=int, default=80, help="working digits for generation")
    sub.add_parser("integrate", parents=[common], help="MLSKI quadrature of a benchmark")
    sub.add_parser("interpolate", parents=[common], help="MLSKI interpolation errors on sample points")
    sub.add_parser("nodes", parents=[common], help="sparse grid node counts per level")
    return parser


def parse_config(argv: list[str] | None) -> tuple[RunConfig, bool]:
    ns = _build_parser().parse_args(argv)
    verbose = ns.verbose
    fields = vars(ns)
    fields.pop("verbose")
    if fields["n"] is None:
        fields["n"] = 7 if ns.command == "gen-tables" else fields["n0"]
    return RunConfig(**fields), verbose


def find_table(cfg: RunConfig, level: int) -> tuple[CardinalTable, str]:
    """Load the table named by ``--table`` or search ``$MLSKI_TABLE_DIR`` for one covering ``level``."""
    if cfg.table:
        path = Path(cfg.table)
        if not path.exists():
            raise TableError(f"table file {path} does not exist")
    else:
        root = Path(os.environ.get("MLSKI_TABLE_DIR", "."))
        path = None
        for L in range(level, 11):
            candidate = root / table_filename(cfg.c, L)
            if candidate.exists():
                path = candidate
                break
        if path is None:
            raise TableError(
                f"no table for c={cfg.c} with L_max >= {level} in {root}; "
                f"run: mlski gen-tables --shape {cfg.c} --level-max {max(level, 7)}"
            )
    table = load_table(path, expected_c=cfg.c)
    if table.L_max < level:
        raise TableError(f"table {path} has L_max={table.L_max}, level {level} is needed")
    return table, str(path)


def _resolve_function(cfg: RunConfig):
    if not cfg.function:
        raise ParameterError("--function is required")
    fn = lookup(cfg.function, cfg.dim)
    cfg.dim = fn.d
    return fn


def _check_size(cfg: RunConfig) -> int:
    size = sparse_grid_size(cfg.n, cfg.dim)
    if size > cfg.node_budget:
        raise BudgetExceededError(f"{size} nodes exceed --node-budget {cfg.node_budget}")
    if size > LARGE_RUN_NODES and not cfg.allow_large:
        raise BudgetExceededError(f"{size} nodes; pass --allow-large to run fits above {LARGE_RUN_NODES}")
    return size


def _provenance(cfg: RunConfig, table: CardinalTable | None) -> dict:
    meta = {k: v for k, v in asdict(cfg).items() if k not in ("out", "format", "threads")}
    if table is not None:
        meta["table_sha256"] = table.digest
        meta["table_L_max"] = table.L_max
        meta["table_gen_digits"] = table.config.gen_digits
    meta["version"] = __version__
    return meta


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def render(cfg: RunConfig, meta: dict, columns: list[str], rows: list[dict]) -> str:
    if cfg.format == "json":
        doc = {"config": meta, "rows": rows}
        return json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n"
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}: {meta[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen_tables(cfg: RunConfig) -> int:
    table = generate_table(ShapeConfig(cfg.c, cfg.n, cfg.digits), workers=cfg.threads)
    if cfg.out:
        path = Path(cfg.out)
    else:
        path = Path(os.environ.get("MLSKI_TABLE_DIR", ".")) / table_filename(cfg.c, cfg.n)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_table(table, path)
    if cfg.format == "json":
        path.with_name(path.name + ".json").write_text(table.to_json())
    print(f"# table: {path}")
    print(f"# sha256: {table.digest}")
    print("level,points,identity_residual")
    for m, res in enumerate(table.residuals, 1):
        print(f"{m},{2**m + 1},{res!r}")
    return EXIT_OK


def cmd_integrate(cfg: RunConfig) -> int:
    fn = _resolve_function(cfg)
    _check_size(cfg)
    table, _ = find_table(cfg, cfg.n)
    M = mlski_fit(fn, cfg.n0, cfg.n, cfg.dim, table, cfg.node_budget)
    _, report = multilevel_quadrature(M, fn.exact_integral, cfg.node_budget)
    rows = [
        {"level": r.level, "nodes": r.nodes, "estimate": r.estimate,
         "abs_error": r.abs_error, "rel_error": r.rel_error}
        for r in report
    ]
    _emit(cfg, render(cfg, _provenance(cfg, table), ["level", "nodes", "estimate", "abs_error", "rel_error"], rows))
    return EXIT_OK


def sample_points(d: int, count: int, seed: int) -> np.ndarray:
    """Reproducible scrambled Halton points in [0, 1]^d."""
    return qmc.Halton(d, scramble=True, seed=seed).random(count)


def interpolation_errors(M: MultilevelInterpolant, fn, X: np.ndarray) -> list[dict]:
    exact = fn(X)
    rows = []
    for j, delta in enumerate(M.deltas):
        partial = MultilevelInterpolant(M.n0, delta.n, M.d, M.deltas[: j + 1], M.table)
        err = np.abs(mlski_eval(partial, X) - exact)
        rows.append({
            "level": delta.n,
            "nodes": delta.num_nodes,
            "max_error": float(err.max()),
            "rms_error": float(np.sqrt(np.mean(err**2))),
        })
    return rows


def cmd_interpolate(cfg: RunConfig) -> int:
    fn = _resolve_function(cfg)
    _check_size(cfg)
    table, _ = find_table(cfg, cfg.n)
    M = mlski_fit(fn, cfg.n0, cfg.n, cfg.dim, table, cfg.node_budget)
    rows = interpolation_errors(M, fn, sample_points(cfg.dim, cfg.samples, cfg.seed))
    _emit(cfg, render(cfg, _provenance(cfg, table), ["level", "nodes", "max_error", "rms_error"], rows))
    return EXIT_OK


def cmd_nodes(cfg: RunConfig) -> int:
    if cfg.dim is None:
        raise ParameterError("--dim is required")
    rows = []
    for k in range(cfg.n0, cfg.n + 1):
        size = sparse_grid_size(k, cfg.dim)
        if size > cfg.node_budget:
            raise BudgetExceededError(f"level {k}: {size} nodes exceed --node-budget {cfg.node_budget}")
        rows.append({"level": k, "nodes": size})
    _emit(cfg, render(cfg, _provenance(cfg, None), ["level", "nodes"], rows))
    return EXIT_OK


COMMANDS = {
    "gen-tables": cmd_gen_tables,
    "integrate": cmd_integrate,
    "interpolate": cmd_interpolate,
    "nodes": cmd_nodes,
}


def main(argv: list[str] | None = None) -> int:
    try:
        cfg, verbose = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
    try:
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except ParameterError as exc:
        log.error("parameter error: %s", exc)
        return EXIT_PARAM
    except TableError as exc:
        log.error("table error: %s", exc)
        return EXIT_TABLE
    except BudgetExceededError as exc:
        log.error("budget exceeded: %s", exc)
        return EXIT_BUDGET
    except MLSKIError as exc:
        log.error("error: %s", exc)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
