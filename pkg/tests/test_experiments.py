import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetnet import ConfigError, paper_config, paper_model
from hetnet.experiments import (
    AntennaSplit,
    SweepSpec,
    apply_variable,
    optimize_parameter,
    optimize_scalar,
    optimize_split,
    reproduce,
    split_grid,
    sweep,
)
from hetnet.rate import RateSettings, achievable_rate

MODEL = paper_model()
CONFIG = paper_config(M_m=20)


class TestSweepSpec:
    def test_empty_grid(self):
        with pytest.raises(ConfigError, match="empty"):
            SweepSpec("lambda_s", (), MODEL, CONFIG)

    def test_grid_must_increase(self):
        with pytest.raises(ConfigError, match="increasing"):
            SweepSpec("lambda_s", (2.0, 2.0), MODEL, CONFIG)

    def test_integer_antennas_for_simulation(self):
        with pytest.raises(ConfigError, match="integer"):
            SweepSpec("M_m", (20.5,), MODEL, CONFIG, engine="montecarlo")

    def test_unknown_variable(self):
        with pytest.raises(ConfigError):
            SweepSpec("alpha", (1.0,), MODEL, CONFIG)


class TestSweep:
    def test_singleton_matches_direct_call(self):
        (point,) = sweep(SweepSpec("lambda_s", (3.0,), MODEL, CONFIG))
        direct = achievable_rate(MODEL, CONFIG.replace(lambda_s=3.0))
        assert point.ok and point.result.r_total == direct.r_total

    def test_failures_are_recorded(self):
        spec = SweepSpec("varpi", (0.2, 0.99), MODEL, CONFIG.replace(lambda_s=5.0), engine="association",
                         m_total=200)
        good, bad = sweep(spec)
        assert good.ok and not bad.ok and "infeasible" in bad.error

    def test_simulation_sweep_is_deterministic(self):
        spec = SweepSpec("lambda_s", (1.0, 2.0), MODEL, CONFIG, engine="montecarlo", n_realizations=4, seed=7)
        a, b = sweep(spec), sweep(spec)
        assert [p.result.mean_rate for p in a] == [p.result.mean_rate for p in b]
        assert a[0].result.mean_rate != a[1].result.mean_rate

    def test_n_variable_keeps_tau_valid(self):
        c = apply_variable(CONFIG, "N", 15)
        assert c.N == 15 and c.tau >= 15
        with pytest.raises(ConfigError):
            apply_variable(CONFIG, "N", 2.5)


def peak(x):
    return -((x - 3.3) ** 2)


class TestOptimizeScalar:
    def test_finds_peak(self):
        res = optimize_scalar(peak, (0.0, 10.0), tolerance=1e-6)
        assert res.argmax == pytest.approx(3.3, abs=1e-5) and res.flag is None

    def test_plateau(self):
        res = optimize_scalar(lambda x: 1.0, (2.0, 4.0))
        assert res.flag == "plateau" and res.argmax == 3.0

    def test_multimodal(self):
        res = optimize_scalar(lambda x: math.cos(3 * x), (0.0, 10.0))
        assert res.flag == "multimodal"
        assert res.argmax in res.grid

    def test_boundary(self):
        res = optimize_scalar(lambda x: x, (0.0, 1.0), tolerance=1e-6)
        assert res.flag == "boundary" and res.argmax == pytest.approx(1.0, abs=1e-5)

    def test_bad_bracket(self):
        with pytest.raises(ValueError):
            optimize_scalar(peak, (1.0, 1.0))

    @given(scale=st.floats(1e-3, 1e3), shift=st.floats(-10, 10), power=st.integers(1, 3))
    def test_monotone_rescaling(self, scale, shift, power):
        def transformed(x):
            v = peak(x) - 1.0  # negative
            return scale * -((-v) ** power) + shift

        base = optimize_scalar(peak, (0.0, 10.0), tolerance=1e-4)
        other = optimize_scalar(transformed, (0.0, 10.0), tolerance=1e-4)
        assert other.argmax == base.argmax

    def test_rate_rescaling(self):
        cfg = paper_config(M_m=20)
        coarse = RateSettings(r_nodes=8, z_nodes=24, u_nodes=16)

        def rate(lam):
            return achievable_rate(MODEL, cfg.replace(lambda_s=lam), coarse).r_total

        one = optimize_scalar(rate, (1.0, 60.0), tolerance=2.0, pre_grid=8)
        two = optimize_scalar(lambda x: 2 * rate(x), (1.0, 60.0), tolerance=2.0, pre_grid=8)
        assert one.argmax == two.argmax and two.value == pytest.approx(2 * one.value)

    def test_log_scale_parameter(self):
        coarse = RateSettings(r_nodes=8, z_nodes=24, u_nodes=16)
        res = optimize_parameter("B", MODEL, paper_config(M_m=20), (0.01, 100.0), tolerance=0.2,
                                 log_scale=True, settings=coarse)
        assert 0.01 <= res.argmax <= 100.0 and all(g > 0 for g in res.grid)


class TestAntennaSplit:
    def test_induced_counts(self):
        split = AntennaSplit(200, 0.25, 10.0)
        assert split.M_m == 150 and split.M_s == 5
        assert split.feasible(10) and split.rounded() == (150, 5)

    @pytest.mark.parametrize("varpi,lam", [(0.96, 10.0), (0.01, 10.0), (1.0, 5.0)])
    def test_infeasible(self, varpi, lam):
        assert not AntennaSplit(200, varpi, lam).feasible(10)

    def test_grid_starts_at_one_antenna_per_scb(self):
        grid = split_grid(200, paper_config(lambda_s=10.0))
        assert grid[0] == pytest.approx(0.05)
        assert grid[-1] <= 1 - 10 / 200

    def test_empty_feasible_grid(self):
        with pytest.raises(ConfigError, match="feasible"):
            optimize_split(200, MODEL, paper_config(lambda_s=10.0), [0.001, 0.002])

    def test_optimum_is_interior(self):
        coarse = RateSettings(r_nodes=8, z_nodes=24, u_nodes=16)
        config = paper_config(lambda_s=10.0)
        res = optimize_split(200, MODEL, config, [0.1, 0.3, 0.5, 0.7, 0.9], tolerance=0.02, settings=coarse)
        assert 0.1 < res.varpi_star < 0.9
        assert res.rate_star >= max(r for r in res.rates if not math.isnan(r))


def test_reproduce_unknown_figure(tmp_path):
    with pytest.raises(ConfigError):
        reproduce("fig1", tmp_path, MODEL, CONFIG)


def test_reproduce_antenna_figure(tmp_path):
    path, rows = reproduce("fig5", tmp_path, MODEL, paper_config())
    with open(path, newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["M_m", "r_total", "r_m_los", "r_m_nlos", "r_s_los", "r_s_nlos"]
    assert len(table) == len(rows) + 1 == 9
