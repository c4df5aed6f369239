import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from mlski.cardinal1d import (
    TABLE_TOL,
    CardinalTable,
    ShapeConfig,
    check_platform_erf,
    erf_hp,
    eval_cardinals,
    generate_table,
    gram_matrix,
    identity_residual,
    integrate_cardinal,
    load_table,
    save_table,
)
from mlski.errors import ConfigMismatchError, GenerationError, ParameterError, TableFormatError

from oracles import inverse_3x3_symmetric_toeplitz


class TestShapeConfig:
    @pytest.mark.parametrize("kwargs", [dict(c=0.0), dict(c=-1.0), dict(L_max=0), dict(L_max=11), dict(gen_digits=20)])
    def test_rejects(self, kwargs):
        with pytest.raises(ParameterError):
            ShapeConfig(**kwargs)


class TestGram:
    def test_level_one(self):
        e1, e4 = math.exp(-1), math.exp(-4)
        expected = [[1, e1, e4], [e1, 1, e1], [e4, e1, 1]]
        np.testing.assert_allclose(gram_matrix(1, 1.0), expected, rtol=0, atol=1e-16)

    @pytest.mark.parametrize("m", range(1, 8))
    def test_unit_diagonal_and_symmetric(self, m):
        G = gram_matrix(m, 0.7)
        assert np.all(np.diag(G) == 1.0)
        assert np.array_equal(G, G.T)
        assert np.all(np.linalg.eigvalsh(G) > 0)

    def test_corner_entry(self):
        assert gram_matrix(2, 1.0)[0, 4] == math.exp(-16)

    def test_level_independence(self):
        small, big = gram_matrix(3, 0.8), gram_matrix(6, 0.8)
        np.testing.assert_array_equal(big[:9, :9], small)
        for k in range(9):
            assert np.all(np.diagonal(big, k) == small[0, k])


class TestErf:
    def test_zero(self):
        assert erf_hp(0) == 0

    @pytest.mark.parametrize("x", [0.1, 1.0, 2.5, 3.0, 3.5, 7.0])
    def test_odd(self, x):
        assert erf_hp(-x, 50) + erf_hp(x, 50) == 0

    def test_one(self):
        assert float(erf_hp(1, 30)) == pytest.approx(0.842700792949715, abs=5e-16)

    @pytest.mark.parametrize("x", [0.3, 1.7, 2.99, 3.01, 4.5, 6.0, 9.0, 15.0])
    @pytest.mark.parametrize("digits", [30, 80])
    def test_against_mpmath(self, x, digits):
        with mpmath.workdps(digits + 20):
            ref = mpmath.erf(x)
            assert abs(erf_hp(x, digits) - ref) <= mpmath.mpf(10) ** (-digits + 1)

    def test_platform_sweep(self):
        assert check_platform_erf(1000) <= 1e-15


class TestGeneration:
    def test_level_one_closed_form(self, table):
        a, b = math.exp(-1), math.exp(-4)
        expected = inverse_3x3_symmetric_toeplitz(a, b)
        np.testing.assert_allclose(table.gamma(1), expected, rtol=1e-15, atol=1e-15)

    def test_middle_cardinal_at_midpoint(self, table):
        np.testing.assert_allclose(eval_cardinals(table, 1, 0.5), [0, 1, 0], atol=TABLE_TOL)

    @pytest.mark.parametrize("m", range(1, 8))
    def test_identity_residual(self, table, m):
        assert table.residuals[m - 1] <= TABLE_TOL
        assert identity_residual(table.gamma(m), 1.0) <= TABLE_TOL

    @pytest.mark.parametrize("m", range(1, 8))
    def test_symmetries(self, table, m):
        g = table.gamma(m)
        assert np.array_equal(g, g.T)
        assert np.array_equal(g, g[::-1, ::-1])
        w = table.integral(m)
        assert np.array_equal(w, w[::-1])

    @pytest.mark.parametrize("m", range(1, 8))
    def test_cardinality_at_nodes(self, table, m):
        nodes = np.arange(2**m + 1) / 2**m
        V = eval_cardinals(table, m, nodes)
        assert np.abs(V - np.eye(2**m + 1)).max() <= 1e-10

    def test_off_node_dense_solve(self, table):
        y = 0.25
        k = np.exp(-((2 * y - np.arange(3)) ** 2))
        expected = np.linalg.solve(gram_matrix(1, 1.0), k)
        np.testing.assert_allclose(eval_cardinals(table, 1, y), expected, atol=1e-15)

    def test_rejects_outside(self, table):
        with pytest.raises(ParameterError):
            eval_cardinals(table, 2, 1.01)

    def test_ill_conditioned_shape_fails(self):
        with pytest.raises(GenerationError, match="level"):
            generate_table(ShapeConfig(0.3, 3, 40))

    def test_parallel_matches_serial(self):
        cfg = ShapeConfig(0.8, 4, 40)
        assert generate_table(cfg).to_bytes() == generate_table(cfg, workers=2).to_bytes()


class TestIntegrals:
    def test_single_wide_term(self):
        # y = 0 with a steep kernel: half of a full Gaussian integral
        m, c = 1, 40.0
        val = integrate_cardinal([1, 0, 0], m, c, digits=40)
        r = c * 2**m
        assert float(val) == pytest.approx(math.sqrt(math.pi) / (2 * r), rel=1e-15)

    def test_table_uses_closed_form(self, table):
        for m in (1, 3):
            for i in range(2**m + 1):
                val = integrate_cardinal(table.gamma(m)[i], m, 1.0)
                assert float(val) == pytest.approx(table.integral(m)[i], rel=1e-14, abs=1e-16)

    @pytest.mark.parametrize("m", range(1, 5))
    def test_quadrature_oracle(self, table, m):
        nodes = np.arange(2**m + 1) / 2**m
        for i in range(2**m + 1):
            val, err = integrate.quad(
                lambda y: float(eval_cardinals(table, m, y)[i]), 0.0, 1.0,
                points=nodes[1:-1], epsabs=1e-14, epsrel=1e-13, limit=500,
            )
            assert abs(val - table.integral(m)[i]) <= 1e-12

    def test_middle_cardinal_level_one(self, table):
        val, _ = integrate.quad(lambda y: float(eval_cardinals(table, 1, y)[1]), 0, 1, epsabs=1e-14, epsrel=1e-13)
        assert abs(val - table.integral(1)[1]) <= 1e-12


class TestPersistence:
    def test_round_trip(self, table, tmp_path):
        path = tmp_path / "t.mlsk1"
        save_table(table, path)
        loaded = load_table(path, expected_c=1.0)
        assert loaded.config == table.config
        for a, b in zip(loaded.gammas + loaded.integrals, table.gammas + table.integrals):
            assert np.array_equal(a, b)
        assert loaded.residuals == table.residuals
        assert loaded.digest == table.digest

    def test_layout(self, small_table):
        data = small_table.to_bytes()
        header = 5 + 2 + 8 + 1 + 2
        per_level = sum(4 + 8 * (2**m + 1) ** 2 + 8 * (2**m + 1) + 8 for m in range(1, 5))
        assert len(data) == header + per_level
        assert data[:5] == b"MLSK1"

    def test_bad_magic(self, small_table, tmp_path):
        path = tmp_path / "bad.mlsk1"
        path.write_bytes(b"XXXXX" + small_table.to_bytes()[5:])
        with pytest.raises(TableFormatError):
            load_table(path)

    def test_truncated(self, small_table):
        with pytest.raises(TableFormatError):
            CardinalTable.from_bytes(small_table.to_bytes()[:-3])

    def test_wrong_shape_parameter(self, small_table, tmp_path):
        path = tmp_path / "t.mlsk1"
        save_table(small_table, path)
        with pytest.raises(ConfigMismatchError):
            load_table(path, expected_c=0.7)

    def test_corrupted_coefficients(self, small_table):
        data = bytearray(small_table.to_bytes())
        data[40:48] = np.float64(123.0).tobytes()
        with pytest.raises(ConfigMismatchError):
            CardinalTable.from_bytes(bytes(data))

    def test_json_mirror(self, small_table):
        import json

        doc = json.loads(small_table.to_json())
        assert doc["c"] == 1.0 and doc["L_max"] == 4
        assert doc["levels"][1]["gamma"] == small_table.gamma(2).tolist()

    def test_regeneration_is_byte_identical(self, small_table):
        assert generate_table(small_table.config).to_bytes() == small_table.to_bytes()
