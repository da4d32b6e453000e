"""Tests for accuracy metrics and the Monte Carlo harness."""

import json

import numpy as np
import pytest

from huberfactor import (
    DataError,
    DimensionError,
    FactorFit,
    ParameterError,
    normalize_fit,
    replication_errors,
    run_monte_carlo,
    subspace_distance,
)
from huberfactor.metrics import McReport, normality_probe
from huberfactor.simulate import GroundTruth, scenario_config


def identified_truth(n=20, t=24, r=2, seed=0):
    rng = np.random.default_rng(seed)
    L, F = normalize_fit(rng.standard_normal((n, r)), rng.standard_normal((t, r)))
    return GroundTruth(L, F, None)


class TestSubspaceDistance:
    def test_identical_and_orthogonal(self):
        e = np.eye(4)
        assert subspace_distance(e[:, :2], e[:, :2]) == 0.0
        assert subspace_distance(e[:, :1], e[:, 1:2]) == pytest.approx(1.0)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.standard_normal((10, 3)))
        rot, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        assert subspace_distance(q, q @ rot) == pytest.approx(0.0, abs=1e-7)

    def test_known_angle(self):
        th = np.pi / 6
        o1 = np.array([1.0, 0.0])
        o2 = np.array([np.cos(th), np.sin(th)])
        assert subspace_distance(o1, o2) == pytest.approx(np.sin(th))

    def test_unequal_widths_use_larger(self):
        e = np.eye(3)
        # one shared direction out of max(2, 1) columns
        d = subspace_distance(e[:, :2], e[:, :1])
        assert d == pytest.approx(np.sqrt(0.5))

    def test_validation(self):
        e = np.eye(3)
        with pytest.raises(ParameterError, match="first"):
            subspace_distance(2.0 * e[:, :1], e[:, :1])
        with pytest.raises(ParameterError, match="second"):
            subspace_distance(e[:, :1], 0.5 * e[:, :1])
        with pytest.raises(DimensionError):
            subspace_distance(np.eye(3)[:, :1], np.eye(4)[:, :1])


class TestReplicationErrors:
    def test_perfect_fit_scores_zero(self):
        gt = identified_truth()
        common = gt.loadings @ gt.factors.T
        fit = FactorFit(gt.loadings, gt.factors, 0.0 * common, 2)
        cc, fl, fs = replication_errors(fit, gt)
        assert cc == pytest.approx(0.0, abs=1e-15)
        assert fl == pytest.approx(0.0, abs=1e-7)
        assert fs == pytest.approx(0.0, abs=1e-7)

    def test_sign_flip_is_free(self):
        gt = identified_truth(seed=3)
        L = gt.loadings.copy()
        F = gt.factors.copy()
        L[:, 0] *= -1.0
        F[:, 0] *= -1.0
        fit = FactorFit(L, F, 0.0 * (L @ F.T), 2)
        cc, fl, fs = replication_errors(fit, gt)
        assert cc == pytest.approx(0.0, abs=1e-15)
        assert fl == pytest.approx(0.0, abs=1e-7)

    def test_zero_truth_rejected(self):
        gt = identified_truth()
        fit = FactorFit(gt.loadings, gt.factors, np.zeros((20, 24)), 2)
        zero = GroundTruth(0.0 * gt.loadings, gt.factors, None)
        with pytest.raises(DataError, match="zero"):
            replication_errors(fit, zero)

    def test_dimension_mismatch(self):
        gt = identified_truth()
        small = identified_truth(n=10, t=24, seed=1)
        fit = FactorFit(small.loadings, small.factors, np.zeros((10, 24)), 2)
        with pytest.raises(DimensionError):
            replication_errors(fit, gt)


class TestMcReportSerialization:
    def test_accuracy_csv(self):
        rep = McReport(
            mode="accuracy",
            methods={
                "pca": {
                    "mee_cc": 0.02,
                    "mee_cc_iqr": 0.005,
                    "ave_fl": 0.1,
                    "ave_fl_sd": None,
                    "ave_fs": 0.11,
                    "ave_fs_sd": 0.01,
                    "successes": 1,
                }
            },
            replications=1,
            seeds=[7],
            failures=[],
        )
        lines = rep.to_csv().splitlines()
        assert lines[0] == "method,mee_cc,mee_cc_iqr,ave_fl,ave_fl_sd,ave_fs,ave_fs_sd"
        assert lines[1] == "pca,0.02,0.005,0.1,,0.11,0.01"

    def test_rank_csv(self):
        rep = McReport(
            mode="rank",
            methods={
                "er": {
                    "mean_rhat": 3.0,
                    "under_count": 1,
                    "over_count": 2,
                    "successes": 10,
                }
            },
            replications=10,
            seeds=list(range(10)),
            failures=[],
        )
        lines = rep.to_csv().splitlines()
        assert lines[0] == "method,mean_rhat,under,over"
        assert lines[1] == "er,3.0,1,2"

    def test_json_round_trip(self):
        rep = McReport("rank", {}, 0, [], [])
        data = json.loads(rep.to_json())
        assert data["mode"] == "rank"
        assert data["replications"] == 0


class TestRunMonteCarlo:
    def test_method_family_homogeneity(self):
        cfg = scenario_config("A", 1, 20, 20, seed=0)
        with pytest.raises(ParameterError, match="methods"):
            run_monte_carlo(cfg, ["pca", "er"], M=2)
        with pytest.raises(ParameterError):
            run_monte_carlo(cfg, [], M=2)
        with pytest.raises(ParameterError):
            run_monte_carlo(cfg, ["pca"], M=0)

    def test_replication_seed_override(self):
        cfg = scenario_config("A", 1, 20, 20, seed=0)
        rep = run_monte_carlo(cfg, ["pca"], M=2, replication_seeds=[11, 22])
        assert rep.seeds == [11, 22]
        with pytest.raises(DimensionError):
            run_monte_carlo(cfg, ["pca"], M=3, replication_seeds=[1, 2])

    def test_accuracy_mode_summary(self):
        cfg = scenario_config("A", 1, 30, 30, seed=0)
        rep = run_monte_carlo(cfg, ["pca", "hpca"], M=3, master_seed=9)
        assert rep.mode == "accuracy"
        assert rep.replications == 3
        for m in ("pca", "hpca"):
            s = rep.methods[m]
            assert s["successes"] == 3
            assert 0 < s["mee_cc"] < 1
            assert s["ave_fl_sd"] is not None
        assert rep.failures == []

    def test_deterministic_and_thread_invariant(self):
        cfg = scenario_config("A", 1, 30, 30, seed=0)
        a = run_monte_carlo(cfg, ["pca", "ihr"], M=3, master_seed=9)
        b = run_monte_carlo(cfg, ["pca", "ihr"], M=3, master_seed=9)
        c = run_monte_carlo(cfg, ["pca", "ihr"], M=3, master_seed=9, threads=2)
        assert a.to_json() == b.to_json() == c.to_json()

    def test_rank_mode_summary(self):
        cfg = scenario_config("C", 1, 40, 40, seed=0)
        rep = run_monte_carlo(cfg, ["er"], M=3, master_seed=4, k=6)
        s = rep.methods["er"]
        assert rep.mode == "rank"
        assert s["mean_rhat"] == pytest.approx(3.0)
        assert s["under_count"] == 0 and s["over_count"] == 0

    def test_per_replication_failures_recorded(self):
        # k beyond min(N, T) makes every rank call fail; the study
        # must finish anyway with the errors on record
        cfg = scenario_config("C", 1, 10, 10, seed=0)
        rep = run_monte_carlo(cfg, ["er"], M=2, master_seed=1, k=12)
        assert len(rep.failures) == 2
        assert rep.failures[0]["method"] == "er"
        assert "DimensionError" in rep.failures[0]["error"]
        s = rep.methods["er"]
        assert s["successes"] == 0
        assert s["mean_rhat"] is None
        assert "er,,0,0" in rep.to_csv()


class TestNormalityProbe:
    def test_validation(self):
        cfg = scenario_config("A", 1, 16, 16, seed=0)
        with pytest.raises(ParameterError):
            normality_probe(cfg, i=0, M=1)
        with pytest.raises(DimensionError):
            normality_probe(cfg, i=16, M=4)
        heavy = scenario_config("A", 4, 16, 16, seed=0)
        with pytest.raises(ParameterError, match="variance"):
            normality_probe(heavy, i=0, M=4)
        from huberfactor import SimConfig

        t2 = SimConfig(n=16, t=16, dist="mvt", nu=2.0)
        with pytest.raises(ParameterError, match="second moments"):
            normality_probe(t2, i=0, M=4)

    def test_smoke_shapes_and_bounds(self):
        cfg = scenario_config("A", 1, 16, 16, seed=0)
        mean_z, min_qq = normality_probe(cfg, i=3, M=12, master_seed=77)
        assert mean_z.shape == (3,)
        assert np.all(np.abs(mean_z) < 1.0)
        assert 0.7 < min_qq <= 1.0
        again = normality_probe(cfg, i=3, M=12, master_seed=77)
        np.testing.assert_array_equal(mean_z, again[0])
        assert min_qq == again[1]
