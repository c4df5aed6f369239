"""Univariate Gaussian cardinal functions on 2**m + 1 equispaced points.

On the level-``m`` grid ``y_p = p / 2**m`` the kernel translates are scaled
by ``2**m``, so the Gram matrix ``exp(-c**2 (j - p)**2)`` only depends on the
integer offset and the shape parameter ``c``.  Its inverse ``Gamma_m`` holds
the cardinal coefficients: ``chi_{m,i}(y) = sum_p Gamma_m[i, p] k_p(y)`` with
``k_p(y) = exp(-(c (2**m y - p))**2)``.

Tables are generated once in multiple-precision arithmetic, rounded to
binary64 and stored; nothing is solved at evaluation time.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from .errors import ConfigMismatchError, GenerationError, ParameterError, TableFormatError

TABLE_TOL = 1e-13
MAGIC = b"MLSK1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<5sHdBH")
_ERF_TAYLOR_LIMIT = 3


@dataclass(frozen=True)
class ShapeConfig:
    c: float = 1.0
    L_max: int = 7
    gen_digits: int = 80

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ParameterError(f"shape parameter must be positive, got {self.c}")
        if not 1 <= self.L_max <= 10:
            raise ParameterError(f"L_max must lie in [1, 10], got {self.L_max}")
        if self.gen_digits < 30:
            raise ParameterError(f"gen_digits must be >= 30, got {self.gen_digits}")


def gram_matrix(m: int, c: float) -> np.ndarray:
    """Gaussian Gram matrix of the level-``m`` grid, entry ``exp(-c^2 (j-p)^2)``."""
    if m < 1:
        raise ParameterError(f"level must be >= 1, got {m}")
    offsets = np.arange(2**m + 1)
    diff = offsets[:, None] - offsets[None, :]
    return np.exp(-((c * diff) ** 2))


def _context(digits: int) -> mpmath.ctx_mp.MPContext:
    ctx = mpmath.MPContext()
    ctx.dps = digits
    return ctx


def _erfc_cf(ctx, x):
    """erfc(x) for x > 0 by the Laplace continued fraction (modified Lentz)."""
    tol = ctx.eps * 4
    tiny = ctx.mpf(2) ** (-4 * ctx.prec)
    f = C = x
    D = ctx.zero
    k = 1
    while True:
        a = ctx.mpf(k) / 2
        D = x + a * D
        if D == 0:
            D = tiny
        D = 1 / D
        C = x + a / C
        if C == 0:
            C = tiny
        delta = C * D
        f *= delta
        k += 1
        if abs(delta - 1) < tol:
            break
    return ctx.exp(-x * x) / (ctx.sqrt(ctx.pi) * f)


def erf_hp(x, digits: int = 80):
    """Error function to ``digits`` significant decimal digits, returned as an ``mpf``.

    Taylor series for ``|x| <= 3``, continued fraction for the complement
    beyond that.
    """
    # guard digits absorb the e^{x^2} cancellation of the alternating series
    ctx = _context(digits + 15)
    x = ctx.mpf(x)
    if x == 0:
        return mpmath.mpf(0)
    ax = abs(x)
    if ax <= _ERF_TAYLOR_LIMIT:
        x2 = ax * ax
        term = ax
        total = ax
        k = 0
        tol = ctx.eps
        while True:
            k += 1
            term *= -x2 / k
            contrib = term / (2 * k + 1)
            total += contrib
            if abs(contrib) < tol * abs(total):
                break
        val = 2 * total / ctx.sqrt(ctx.pi)
    elif ax * ax > (digits + 10) * math.log(10):
        val = ctx.one
    else:
        val = 1 - _erfc_cf(ctx, ax)
    if x < 0:
        val = -val
    with mpmath.workdps(digits):
        return +mpmath.mpf(val)


def check_platform_erf(samples: int = 1000, rtol: float = 1e-15) -> float:
    """Largest relative deviation of ``math.erf`` from `erf_hp` on ``[-6, 6]``.

    Raises `RuntimeError` when the platform function is not accurate enough
    to be used for double-precision work.
    """
    worst = 0.0
    for x in np.linspace(-6.0, 6.0, samples):
        ref = float(erf_hp(float(x), 30))
        got = math.erf(float(x))
        if ref != 0.0:
            worst = max(worst, abs(got - ref) / abs(ref))
        elif got != 0.0:
            worst = max(worst, abs(got))
    if worst > rtol:
        raise RuntimeError(f"platform erf relative error {worst:.3e} exceeds {rtol:.0e}")
    return worst


def _hp_gram(ctx, m: int, c):
    N = 2**m + 1
    c2 = ctx.mpf(c) ** 2
    diag = [ctx.exp(-c2 * k * k) for k in range(N)]
    return [[diag[abs(j - p)] for p in range(N)] for j in range(N)]


def _hp_spd_inverse(ctx, A):
    """Inverse of a symmetric positive definite matrix via Cholesky, lists of ``mpf``."""
    N = len(A)
    L = [[ctx.zero] * N for _ in range(N)]
    for i in range(N):
        for j in range(i + 1):
            s = A[i][j] - ctx.fdot(L[i][:j], L[j][:j])
            if i == j:
                if s <= 0:
                    raise GenerationError(f"Gram matrix not positive definite at pivot {i}")
                L[i][i] = ctx.sqrt(s)
            else:
                L[i][j] = s / L[j][j]
    # W = L^{-1}, lower triangular
    W = [[ctx.zero] * N for _ in range(N)]
    for i in range(N):
        W[i][i] = 1 / L[i][i]
        for j in range(i):
            s = ctx.fdot(L[i][j:i], [W[k][j] for k in range(j, i)])
            W[i][j] = -s / L[i][i]
    # A^{-1} = W^T W
    cols = [[W[k][j] for k in range(N)] for j in range(N)]
    inv = [[ctx.zero] * N for _ in range(N)]
    for i in range(N):
        for j in range(i, N):
            start = max(i, j)
            v = ctx.fdot(cols[i][start:], cols[j][start:])
            inv[i][j] = inv[j][i] = v
    return inv


def _hp_kernel_integrals(ctx, m: int, c, digits: int):
    """``int_0^1 exp(-(r (x - y_p))^2) dx`` for every node ``y_p``, ``r = c 2^m``."""
    N = 2**m + 1
    r = ctx.mpf(c) * 2**m
    pref = ctx.sqrt(ctx.pi) / (2 * r)
    out = []
    for p in range(N):
        y = ctx.mpf(p) / 2**m
        out.append(pref * (erf_hp(r * (1 - y), digits) - erf_hp(-r * y, digits)))
    return out


def integrate_cardinal(coeffs, m: int, c: float, digits: int = 80):
    """Integral over [0, 1] of ``sum_p coeffs[p] exp(-(c 2^m (y - p 2^-m))^2)``.

    Evaluated in closed form through the error function with ``digits``
    working digits; the result is an ``mpf``.
    """
    ctx = _context(digits + 10)
    if len(coeffs) != 2**m + 1:
        raise ParameterError(f"level {m} needs {2**m + 1} coefficients, got {len(coeffs)}")
    kint = _hp_kernel_integrals(ctx, m, c, digits + 10)
    total = ctx.fdot([ctx.mpf(v) for v in coeffs], kint)
    with mpmath.workdps(digits):
        return +mpmath.mpf(total)


def identity_residual(gamma: np.ndarray, c: float) -> float:
    """``||Gamma G - I||_inf`` (maximum absolute row sum) of the stored doubles.

    The product is formed in extended precision so the figure reflects the
    rounding of the stored coefficients rather than of the check itself.
    """
    N = gamma.shape[0]
    offsets = np.arange(N, dtype=np.longdouble)
    G = np.exp(-((np.longdouble(c) * (offsets[:, None] - offsets[None, :])) ** 2))
    R = gamma.astype(np.longdouble) @ G - np.eye(N, dtype=np.longdouble)
    return float(np.abs(R).sum(axis=1).max())


def _generate_level(m: int, c: float, digits: int):
    ctx = _context(digits)
    N = 2**m + 1
    inv = _hp_spd_inverse(ctx, _hp_gram(ctx, m, c))
    # persymmetry holds analytically; average mirrored entries so it holds bitwise
    for i in range(N):
        for j in range(N):
            a, b = inv[i][j], inv[N - 1 - i][N - 1 - j]
            if (i, j) < (N - 1 - i, N - 1 - j):
                inv[i][j] = inv[N - 1 - i][N - 1 - j] = (a + b) / 2
    kint = _hp_kernel_integrals(ctx, m, c, digits)
    integrals = [ctx.fdot(row, kint) for row in inv]
    for i in range(N // 2):
        avg = (integrals[i] + integrals[N - 1 - i]) / 2
        integrals[i] = integrals[N - 1 - i] = avg
    gamma = np.array([[float(v) for v in row] for row in inv])
    weights = np.array([float(v) for v in integrals])
    return gamma, weights, identity_residual(gamma, c)


@dataclass(eq=False)
class CardinalTable:
    """Cardinal coefficient matrices and cardinal integrals for levels ``1..L_max``."""

    config: ShapeConfig
    gammas: list[np.ndarray]
    integrals: list[np.ndarray]
    residuals: list[float]
    _digest: str | None = field(default=None, repr=False)

    @property
    def c(self) -> float:
        return self.config.c

    @property
    def L_max(self) -> int:
        return self.config.L_max

    def gamma(self, m: int) -> np.ndarray:
        self._check_level(m)
        return self.gammas[m - 1]

    def integral(self, m: int) -> np.ndarray:
        self._check_level(m)
        return self.integrals[m - 1]

    def _check_level(self, m: int) -> None:
        if not 1 <= m <= self.L_max:
            raise ParameterError(f"level {m} not in table (L_max={self.L_max})")

    def to_bytes(self) -> bytes:
        cfg = self.config
        parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, cfg.c, cfg.L_max, cfg.gen_digits)]
        for gamma, weights, res in zip(self.gammas, self.integrals, self.residuals):
            parts.append(struct.pack("<I", gamma.shape[0]))
            parts.append(np.ascontiguousarray(gamma, dtype="<f8").tobytes())
            parts.append(np.ascontiguousarray(weights, dtype="<f8").tobytes())
            parts.append(struct.pack("<d", res))
        return b"".join(parts)

    @property
    def digest(self) -> str:
        """SHA-256 of the serialised table; identifies the table in outputs."""
        if self._digest is None:
            self._digest = hashlib.sha256(self.to_bytes()).hexdigest()
        return self._digest

    def to_json(self) -> str:
        cfg = self.config
        doc = {
            "magic": MAGIC.decode(),
            "version": FORMAT_VERSION,
            "c": cfg.c,
            "L_max": cfg.L_max,
            "gen_digits": cfg.gen_digits,
            "levels": [
                {
                    "m": m,
                    "N": g.shape[0],
                    "gamma": g.tolist(),
                    "integrals": w.tolist(),
                    "residual": r,
                }
                for m, (g, w, r) in enumerate(zip(self.gammas, self.integrals, self.residuals), 1)
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_bytes(cls, data: bytes, expected_c: float | None = None, verify: bool = True) -> "CardinalTable":
        if len(data) < _HEADER.size:
            raise TableFormatError("file too short for header")
        magic, version, c, L_max, digits = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise TableFormatError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise TableFormatError(f"unsupported format version {version}")
        if expected_c is not None and c != expected_c:
            raise ConfigMismatchError(f"table was generated for c={c}, requested c={expected_c}")
        try:
            config = ShapeConfig(c, L_max, digits)
        except ParameterError as exc:
            raise TableFormatError(f"invalid header: {exc}") from exc
        pos = _HEADER.size
        gammas, integrals, residuals = [], [], []
        for m in range(1, L_max + 1):
            try:
                (N,) = struct.unpack_from("<I", data, pos)
                pos += 4
                if N != 2**m + 1:
                    raise TableFormatError(f"level {m} has N={N}, expected {2**m + 1}")
                gamma = np.frombuffer(data, "<f8", N * N, pos).reshape(N, N).astype(float)
                pos += 8 * N * N
                weights = np.frombuffer(data, "<f8", N, pos).astype(float)
                pos += 8 * N
                (res,) = struct.unpack_from("<d", data, pos)
                pos += 8
            except (struct.error, ValueError) as exc:
                raise TableFormatError(f"truncated data at level {m}") from exc
            gammas.append(gamma)
            integrals.append(weights)
            residuals.append(res)
        if pos != len(data):
            raise TableFormatError(f"{len(data) - pos} trailing bytes")
        table = cls(config, gammas, integrals, residuals)
        if verify:
            for m, gamma in enumerate(gammas, 1):
                res = identity_residual(gamma, c)
                if res > TABLE_TOL:
                    raise ConfigMismatchError(
                        f"level {m} identity residual {res:.3e} exceeds {TABLE_TOL:.0e}; "
                        "table is corrupt or was generated for another shape parameter"
                    )
        return table


def generate_table(cfg: ShapeConfig, workers: int = 1) -> CardinalTable:
    """Generate cardinal coefficients and integrals for levels ``1..cfg.L_max``."""
    levels = range(1, cfg.L_max + 1)
    if workers > 1 and cfg.L_max > 1:
        with ProcessPoolExecutor(max_workers=min(workers, cfg.L_max)) as pool:
            # largest levels first so the long jobs start immediately
            futures = {m: pool.submit(_generate_level, m, cfg.c, cfg.gen_digits) for m in reversed(levels)}
            results = [futures[m].result() for m in levels]
    else:
        results = [_generate_level(m, cfg.c, cfg.gen_digits) for m in levels]
    for m, (_, _, res) in zip(levels, results):
        if res > TABLE_TOL:
            raise GenerationError(
                f"level {m}: identity residual {res:.3e} exceeds {TABLE_TOL:.0e} "
                f"(shape parameter c={cfg.c} is too ill-conditioned)"
            )
    return CardinalTable(
        cfg,
        [r[0] for r in results],
        [r[1] for r in results],
        [r[2] for r in results],
    )


def eval_cardinals(table: CardinalTable, m: int, y) -> np.ndarray:
    """Values of all level-``m`` cardinal functions at ``y``.

    Scalar ``y`` gives a vector of length ``2**m + 1``; an array of points
    gives a matrix with one row per point.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any((y_arr < 0.0) | (y_arr > 1.0)) or np.any(np.isnan(y_arr)):
        raise ParameterError("cardinal functions are only defined on [0, 1]")
    gamma = table.gamma(m)
    p = np.arange(gamma.shape[0])
    K = np.exp(-((table.c * (y_arr[..., None] * 2.0**m - p)) ** 2))
    return K @ gamma.T


def table_filename(c: float, L_max: int) -> str:
    return f"gauss_c{float(c)!r}_L{L_max}.mlsk1"


def save_table(table: CardinalTable, path) -> None:
    Path(path).write_bytes(table.to_bytes())


def load_table(path, expected_c: float | None = None) -> CardinalTable:
    return CardinalTable.from_bytes(Path(path).read_bytes(), expected_c=expected_c)


_MEMORY_CACHE: dict[ShapeConfig, CardinalTable] = {}


def get_table(c: float = 1.0, L_max: int = 7, gen_digits: int = 80, cache_dir=None) -> CardinalTable:
    """Return a table for ``(c, L_max)``, loading or generating it as needed.

    Looks in memory, then in ``cache_dir`` (default ``$MLSKI_TABLE_DIR``);
    a freshly generated table is written back to that directory when set.
    """
    cfg = ShapeConfig(c, L_max, gen_digits)
    if cfg in _MEMORY_CACHE:
        return _MEMORY_CACHE[cfg]
    cache_dir = cache_dir or os.environ.get("MLSKI_TABLE_DIR")
    table = None
    if cache_dir:
        path = Path(cache_dir) / table_filename(c, L_max)
        if path.exists():
            table = load_table(path, expected_c=c)
            if table.config.gen_digits != gen_digits:
                table = None
    if table is None:
        table = generate_table(cfg, workers=os.cpu_count() or 1)
        if cache_dir:
            Path(cache_dir).mkdir(parents=True, exist_ok=True)
            save_table(table, Path(cache_dir) / table_filename(c, L_max))
    _MEMORY_CACHE[cfg] = table
    return table
