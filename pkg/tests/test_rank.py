"""Tests for the factor-number selectors."""

import json

import numpy as np
import pytest

from huberfactor import (
    DimensionError,
    Panel,
    ParameterError,
    RankEstimate,
    default_threshold,
    estimate_rank_er,
    estimate_rank_rm,
    rank_from_diag,
)


def factor_panel(n=60, t=60, r=3, noise=1.0, seed=0):
    """Rank-r panel with comparable factor strengths, well above noise.

    Strengths are kept within a narrow band: the relative cut drops
    factors weaker than the fraction P of the leading one, so a wide
    spread would test the dynamic range, not the selector.
    """
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((n, r))
    F = rng.standard_normal((t, r)) * np.linspace(3.0, 2.5, r)
    return Panel.from_values(L @ F.T + noise * rng.standard_normal((n, t)))


class TestDefaultThreshold:
    def test_examples(self):
        assert default_threshold(100, 100) == pytest.approx(0.2154, abs=1e-4)
        assert default_threshold(8, 27) == pytest.approx(0.5)
        assert default_threshold(27, 8) == pytest.approx(0.5)
        assert default_threshold(1, 1) == pytest.approx(1.0)

    def test_validation(self):
        with pytest.raises(ParameterError):
            default_threshold(0, 10)
        with pytest.raises(ParameterError):
            default_threshold(10, -1)


class TestRankFromDiag:
    def test_counts_entries_above_cut(self):
        assert rank_from_diag(np.array([3.2, 1.1, 0.8, 0.001]), 0.1) == 3
        assert rank_from_diag(np.array([3.2, 1.1, 0.8, 0.001]), 1.0) == 2
        assert rank_from_diag(np.array([0.01, 0.001]), 0.1) == 0
        assert rank_from_diag(np.array([]), 0.1) == 0

    def test_cut_must_be_positive(self):
        with pytest.raises(ParameterError):
            rank_from_diag(np.array([1.0]), 0.0)


class TestRankEstimate:
    def test_validation(self):
        with pytest.raises(ParameterError, match="non-increasing"):
            RankEstimate(1, np.array([1.0, 2.0]), 0.5, "rm_hpca")
        with pytest.raises(ParameterError, match="P > 0"):
            RankEstimate(1, np.array([2.0, 1.0]), None, "rm_hpca")
        with pytest.raises(ParameterError):
            RankEstimate(3, np.array([2.0, 1.0]), 0.5, "rm_hpca")
        RankEstimate(1, np.array([2.0, 1.0]), None, "er")

    def test_json_round_trip(self):
        est = RankEstimate(2, np.array([2.0, 1.0, 0.1]), 0.4, "rm_ihr")
        data = json.loads(est.to_json())
        assert data["r_hat"] == 2
        assert data["method"] == "rm_ihr"
        assert data["threshold"] == 0.4
        assert data["sigma_diag"] == [2.0, 1.0, 0.1]


class TestRankMinimization:
    def test_noiseless_overfit_finds_true_rank(self):
        panel = factor_panel(noise=0.0)
        est = estimate_rank_rm(panel, k=8, method="hpca")
        assert est.r_hat == 3
        assert est.method == "rm_hpca"

    def test_noisy_panel_both_methods(self):
        panel = factor_panel(seed=2)
        for method in ("hpca", "ihr"):
            est = estimate_rank_rm(panel, k=8, method=method)
            assert est.r_hat == 3, method

    def test_threshold_semantics(self):
        panel = factor_panel(seed=3)
        est = estimate_rank_rm(panel, k=8, method="hpca")
        assert est.r_hat == int(np.sum(est.sigma_diag > est.threshold))
        P = default_threshold(panel.n_series, panel.n_times)
        assert est.threshold == pytest.approx(P * est.sigma_diag[0])
        assert est.sigma_diag.shape == (8,)

    def test_scale_invariance(self):
        panel = factor_panel(seed=4)
        big = Panel(panel.values * 1e3, panel.series_ids, panel.time_ids)
        a = estimate_rank_rm(panel, k=8, method="hpca")
        b = estimate_rank_rm(big, k=8, method="hpca")
        assert a.r_hat == b.r_hat
        np.testing.assert_allclose(b.sigma_diag, 1e6 * a.sigma_diag, rtol=1e-8)

    def test_rhat_non_increasing_in_P(self):
        panel = factor_panel(n=50, t=50, seed=5)
        grid = [0.02, 0.05, 0.1, 0.2154, 0.5, 0.9, 1.5]
        hats = [
            estimate_rank_rm(panel, k=6, method="hpca", P=P).r_hat for P in grid
        ]
        assert all(a >= b for a, b in zip(hats, hats[1:]))

    def test_explicit_P_respected(self):
        panel = factor_panel(seed=6)
        est = estimate_rank_rm(panel, k=8, method="hpca", P=0.9)
        assert est.threshold == pytest.approx(0.9 * est.sigma_diag[0])

    def test_validation(self):
        panel = factor_panel(n=20, t=20)
        with pytest.raises(ParameterError):
            estimate_rank_rm(panel, k=0)
        with pytest.raises(DimensionError):
            estimate_rank_rm(panel, k=21)
        with pytest.raises(ParameterError):
            estimate_rank_rm(panel, k=4, method="pca")
        with pytest.raises(ParameterError):
            estimate_rank_rm(panel, k=4, P=0.0)


class TestEigenvalueRatio:
    def test_finds_true_rank(self):
        panel = factor_panel(seed=7)
        est = estimate_rank_er(panel, 8)
        assert est.r_hat == 3
        assert est.method == "er"
        assert est.threshold is None
        assert est.sigma_diag.shape == (9,)

    def test_vanishing_eigenvalue_wins_at_smallest_index(self):
        # identically zero series give exact zero eigenvalues, so every
        # ratio from the second on is infinite; argmax takes the first
        rng = np.random.default_rng(8)
        vals = np.zeros((5, 12))
        vals[0] = 3.0 * rng.standard_normal(12)
        vals[1] = rng.standard_normal(12)
        est = estimate_rank_er(Panel.from_values(vals), 4)
        assert est.r_hat == 2

    def test_validation(self):
        panel = factor_panel(n=10, t=10)
        with pytest.raises(ParameterError):
            estimate_rank_er(panel, 0)
        with pytest.raises(DimensionError):
            estimate_rank_er(panel, 10)

    def test_scale_invariance(self):
        panel = factor_panel(seed=9)
        big = Panel(panel.values * 250.0, panel.series_ids, panel.time_ids)
        assert estimate_rank_er(panel, 8).r_hat == estimate_rank_er(big, 8).r_hat
