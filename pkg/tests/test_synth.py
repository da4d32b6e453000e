"""Tests for the synthetic panel generators."""

import json

import numpy as np
import pytest
from scipy import stats

from huberfactor import (
    ParameterError,
    SimConfig,
    gen_alpha_stable,
    gen_mvt,
    gen_scenario,
    gen_skew_t,
    scenario_config,
)
from huberfactor.panel import Panel
from huberfactor.simulate import _spillover, save_ground_truth


class TestSimConfig:
    def test_field_validation(self):
        with pytest.raises(ParameterError):
            SimConfig(n=0, t=10)
        with pytest.raises(ParameterError):
            SimConfig(n=10, t=10, r=0)
        with pytest.raises(ParameterError):
            SimConfig(n=10, t=10, theta=-0.1)
        with pytest.raises(ParameterError):
            SimConfig(n=10, t=10, rho=1.0)
        with pytest.raises(ParameterError):
            SimConfig(n=10, t=10, beta=-0.2)
        with pytest.raises(ParameterError):
            SimConfig(n=10, t=10, j_width=11)
        with pytest.raises(ParameterError):
            SimConfig(n=10, t=10, dist="laplace")

    def test_dist_specific_requirements(self):
        with pytest.raises(ParameterError, match="nu"):
            SimConfig(n=5, t=5, dist="mvt")
        with pytest.raises(ParameterError, match="nu"):
            SimConfig(n=5, t=5, dist="mvt_errors", nu=0.0)
        with pytest.raises(ParameterError, match="alpha"):
            SimConfig(n=5, t=5, dist="alpha_stable", alpha=2.5)
        with pytest.raises(ParameterError, match="skew"):
            SimConfig(n=5, t=5, dist="skewt_stable", alpha=1.9, nu=3.0)

    def test_dict_round_trip(self):
        cfg = SimConfig(n=7, t=9, r=2, dist="mvt", nu=3.0, seed=42)
        assert SimConfig.from_dict(cfg.to_dict()) == cfg


class TestAlphaStable:
    def test_alpha_two_is_gaussian(self):
        rng = np.random.default_rng(3)
        d = gen_alpha_stable(2.0, 0.0, 1.0, 0.0, rng, size=50_000)
        ks = stats.kstest(d, stats.norm(0.0, np.sqrt(2.0)).cdf)
        assert ks.statistic < 0.01

    def test_alpha_one_is_cauchy(self):
        rng = np.random.default_rng(4)
        d = gen_alpha_stable(1.0, 0.0, 1.0, 0.0, rng, size=50_000)
        assert stats.kstest(d, stats.cauchy.cdf).statistic < 0.01

    def test_positive_skew_fattens_right_tail(self):
        rng = np.random.default_rng(5)
        d = gen_alpha_stable(1.9, 0.8, 1.0, 0.0, rng, size=200_000)
        right = int(np.sum(d > 5.0))
        left = int(np.sum(d < -5.0))
        assert right > 3 * left

    def test_scale_and_loc(self):
        rng = np.random.default_rng(6)
        d = gen_alpha_stable(2.0, 0.0, 3.0, 10.0, rng, size=50_000)
        assert np.median(d) == pytest.approx(10.0, abs=0.1)
        assert np.std(d) == pytest.approx(3.0 * np.sqrt(2.0), rel=0.05)

    def test_scalar_and_shape(self):
        rng = np.random.default_rng(0)
        assert isinstance(gen_alpha_stable(1.5, rng=rng), float)
        assert gen_alpha_stable(1.5, rng=rng, size=(3, 4)).shape == (3, 4)

    def test_validation(self):
        with pytest.raises(ParameterError):
            gen_alpha_stable(0.0)
        with pytest.raises(ParameterError):
            gen_alpha_stable(2.1)
        with pytest.raises(ParameterError):
            gen_alpha_stable(1.5, skew=1.5)
        with pytest.raises(ParameterError):
            gen_alpha_stable(1.5, scale=0.0)


class TestMvt:
    def test_marginal_variance(self):
        rng = np.random.default_rng(7)
        draws = np.array([gen_mvt(5.0, 4, rng) for _ in range(20_000)])
        # t(5) variance is 5/3 per coordinate
        assert np.var(draws) == pytest.approx(5.0 / 3.0, rel=0.1)

    def test_coordinates_share_mixing(self):
        rng = np.random.default_rng(8)
        draws = np.array([gen_mvt(8.0, 2, rng) for _ in range(20_000)])
        corr = np.corrcoef(draws[:, 0] ** 2, draws[:, 1] ** 2)[0, 1]
        assert corr > 0.05

    def test_validation(self):
        with pytest.raises(ParameterError):
            gen_mvt(0.0, 3)
        with pytest.raises(ParameterError):
            gen_mvt(3.0, 0)


class TestSkewT:
    def test_zero_skew_is_symmetric_t(self):
        rng = np.random.default_rng(2)
        d = gen_skew_t(5.0, 0.0, rng, size=50_000)
        assert stats.kstest(d, stats.t(5).cdf).statistic < 0.01

    def test_large_nu_is_skew_normal(self):
        rng = np.random.default_rng(1)
        d = gen_skew_t(1e12, 4.0, rng, size=50_000)
        assert stats.kstest(d, stats.skewnorm(4.0).cdf).statistic < 0.01

    def test_strong_skew_pushes_mass_positive(self):
        rng = np.random.default_rng(0)
        d = gen_skew_t(3.0, 20.0, rng, size=50_000)
        assert np.mean(d > 0) > 0.9

    def test_validation(self):
        with pytest.raises(ParameterError):
            gen_skew_t(0.0, 1.0)


class TestSpillover:
    def test_matches_window_sum_oracle(self):
        rng = np.random.default_rng(9)
        v = rng.standard_normal((17, 5))
        beta, j = 0.3, 4
        got = _spillover(v, beta, j)
        want = np.empty_like(v)
        for i in range(17):
            lo, hi = max(i - j, 0), min(i + j, 16)
            want[i] = (1 - beta) * v[i] + beta * v[lo : hi + 1].sum(axis=0)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_degenerate_window(self):
        v = np.random.default_rng(1).standard_normal((6, 3))
        np.testing.assert_array_equal(_spillover(v, 0.0, 3), v)
        np.testing.assert_array_equal(_spillover(v, 0.4, 0), v)


class TestGenScenario:
    def test_shapes_and_determinism(self):
        cfg = scenario_config("A", 1, 12, 15, seed=3, r=2)
        a = gen_scenario(cfg)
        b = gen_scenario(cfg)
        assert a.loadings.shape == (12, 2)
        assert a.factors.shape == (15, 2)
        assert a.panel.values.shape == (12, 15)
        np.testing.assert_array_equal(a.panel.values, b.panel.values)
        c = gen_scenario(scenario_config("A", 1, 12, 15, seed=4, r=2))
        assert not np.array_equal(a.panel.values, c.panel.values)

    def test_streams_are_independent(self):
        # growing N must not perturb the factor draws, and growing r
        # must not perturb the error draws
        small = gen_scenario(scenario_config("A", 1, 10, 20, seed=5))
        large = gen_scenario(scenario_config("A", 1, 40, 20, seed=5))
        np.testing.assert_array_equal(small.factors, large.factors)

        r2 = gen_scenario(scenario_config("A", 1, 10, 20, seed=6, r=2))
        r3 = gen_scenario(scenario_config("A", 1, 10, 20, seed=6, r=3))
        u2 = r2.panel.values - r2.loadings @ r2.factors.T
        u3 = r3.panel.values - r3.loadings @ r3.factors.T
        np.testing.assert_allclose(u2, u3, atol=1e-12)

    def test_theta_zero_is_noiseless(self):
        gt = gen_scenario(scenario_config("A", 1, 8, 9, seed=1, theta=0.0))
        np.testing.assert_allclose(
            gt.panel.values, gt.loadings @ gt.factors.T, atol=1e-12
        )

    def test_dynamic_errors_unit_variance_and_persistence(self):
        gt = gen_scenario(scenario_config("B", 1, 60, 2000, seed=7))
        u = gt.panel.values - gt.loadings @ gt.factors.T
        inner = u[15:45]
        assert float(np.mean(np.var(inner, axis=1))) == pytest.approx(1.0, abs=0.1)
        ac = np.mean([np.corrcoef(row[:-1], row[1:])[0, 1] for row in inner])
        assert 0.4 < ac < 0.6

    def test_joint_t_ties_factor_and_error_tails(self):
        cfg = scenario_config("A", 2, 30, 500, seed=5)
        gt = gen_scenario(cfg)
        u = gt.panel.values - gt.loadings @ gt.factors.T
        fsq = np.mean(gt.factors**2, axis=1)
        usq = np.mean(u**2, axis=0)
        assert np.corrcoef(fsq, usq)[0, 1] > 0.3

    def test_t_errors_leave_factors_gaussian(self):
        cfg = scenario_config("A", 3, 30, 500, seed=5)
        gt = gen_scenario(cfg)
        u = gt.panel.values - gt.loadings @ gt.factors.T
        fsq = np.mean(gt.factors**2, axis=1)
        usq = np.mean(u**2, axis=0)
        assert abs(np.corrcoef(fsq, usq)[0, 1]) < 0.15


class TestScenarioConfig:
    def test_case_tables(self):
        a1 = scenario_config("A", 1, 50, 60, seed=0)
        assert a1.dist == "gaussian" and a1.rho == 0.0 and a1.j_width == 0
        a2 = scenario_config("A", 2, 50, 60, seed=0)
        assert a2.dist == "mvt" and a2.nu == 3.0
        a5 = scenario_config("A", 5, 50, 60, seed=0)
        assert a5.dist == "skewt_stable" and a5.skew == 20.0
        b1 = scenario_config("B", 1, 300, 60, seed=0)
        assert b1.rho == 0.5 and b1.beta == 0.2 and b1.j_width == 15
        b_small = scenario_config("B", 1, 40, 60, seed=0)
        assert b_small.j_width == 10
        c2 = scenario_config("C", 2, 50, 60, seed=0)
        assert c2.dist == "mvt" and c2.nu == 5.0
        d3 = scenario_config("D", 3, 50, 60, seed=0)
        assert d3.dist == "mvt" and d3.nu == 3.0 and d3.rho == 0.5

    def test_lowercase_scenario_accepted(self):
        assert scenario_config("a", 1, 10, 10, seed=0).dist == "gaussian"

    def test_unknown_scenario_and_case(self):
        with pytest.raises(ParameterError):
            scenario_config("E", 1, 10, 10, seed=0)
        with pytest.raises(ParameterError, match="valid"):
            scenario_config("C", 4, 10, 10, seed=0)


class TestSaveGroundTruth:
    def test_files_round_trip(self, tmp_path):
        cfg = scenario_config("A", 2, 6, 8, seed=11)
        gt = gen_scenario(cfg)
        save_ground_truth(gt, cfg, tmp_path)
        panel = Panel.read_csv(tmp_path / "panel.csv")
        np.testing.assert_array_equal(panel.values, gt.panel.values)
        lines = (tmp_path / "truth_loadings.csv").read_text().splitlines()
        assert lines[0] == "series,f1,f2,f3"
        assert len(lines) == 7
        got = json.loads((tmp_path / "config.json").read_text())
        assert SimConfig.from_dict(got) == cfg
        flines = (tmp_path / "truth_factors.csv").read_text().splitlines()
        assert flines[0] == "time,f1,f2,f3"
        first = flines[1].split(",")
        assert float(first[1]) == gt.factors[0, 0]
