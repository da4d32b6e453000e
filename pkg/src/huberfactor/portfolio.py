"""Factor-based covariance estimation and a minimum-variance backtest.

Monthly covariance comes from a factor fit on the trailing window: the
common-component covariance plus a hard-thresholded residual
covariance, repaired to positive definiteness by eigenvalue clipping
when needed.  Minimum-variance weights impose only the budget
constraint, so shorts are allowed.  The backtest walks the panel one
month at a time, always fitting on the past ``window`` months only.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import (
    DataError,
    DefinitenessError,
    DimensionError,
    ParameterError,
)
from .estimators import HpcaConfig, IhrConfig, fit_hpca, fit_ihr, fit_pca
from .huber import HuberConfig
from .panel import FactorFit, Panel

__all__ = [
    "BacktestConfig",
    "BacktestReport",
    "PerfStats",
    "hard_threshold",
    "factor_covariance",
    "min_variance_weights",
    "performance_stats",
    "rolling_backtest",
]

QUANTILE_LEVELS = (0.1, 0.25, 0.5, 0.75, 0.9)

_METHODS = ("pca", "hpca", "ihr")


@dataclass(frozen=True)
class BacktestConfig:
    """Rolling-backtest controls.

    ``threshold_const`` scales the residual-covariance cut
    C * sqrt(log N / window); it is the single most result-sensitive
    knob of the pipeline.
    """

    method: str = "ihr"
    r: int = 2
    window: int = 72
    threshold_const: float = 0.5
    huber: HuberConfig = field(default_factory=HuberConfig)

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.r < 1:
            raise ParameterError("r must be positive")
        if self.window < self.r + 1:
            raise ParameterError(
                f"window {self.window} too short for rank {self.r}"
            )
        if not self.threshold_const > 0:
            raise ParameterError("threshold_const must be positive")


@dataclass(frozen=True)
class PerfStats:
    """Summary statistics of a return series."""

    mean: float
    sd: float | None
    sharpe: float | None
    quantiles: dict


@dataclass(frozen=True)
class BacktestReport:
    """Out-of-sample returns of the rolling strategy plus summaries.

    ``skipped`` lists months whose covariance could not be made
    positive definite; their returns are absent from the series.
    ``weights`` holds one weight vector per realized month for optional
    serialization.
    """

    time_ids: list
    oos_returns: np.ndarray
    mean_return: float
    sd_return: float | None
    sharpe: float | None
    quantiles: dict
    skipped: list
    weights: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "mean_return": self.mean_return,
            "sd_return": self.sd_return,
            "sharpe": self.sharpe,
            "quantiles": {str(k): v for k, v in self.quantiles.items()},
            "n_months": int(self.oos_returns.size),
            "skipped": list(self.skipped),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    def save(self, out_dir, series_ids=None, write_weights: bool = False) -> None:
        """Write report.json and oos_returns.csv (and weights.csv on request)."""
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")
        with open(
            os.path.join(out_dir, "oos_returns.csv"), "w", encoding="utf-8"
        ) as fh:
            fh.write("time,return\n")
            for tid, ret in zip(self.time_ids, self.oos_returns):
                fh.write(f"{tid},{float(ret)!r}\n")
        if write_weights and self.weights is not None:
            header = "time," + ",".join(series_ids or
                [f"s{i}" for i in range(1, self.weights.shape[1] + 1)])
            with open(
                os.path.join(out_dir, "weights.csv"), "w", encoding="utf-8"
            ) as fh:
                fh.write(header + "\n")
                for tid, row in zip(self.time_ids, self.weights):
                    fh.write(
                        str(tid) + "," + ",".join(repr(float(w)) for w in row) + "\n"
                    )


def hard_threshold(S, thr: float) -> np.ndarray:
    """Zero off-diagonal entries smaller than ``thr`` in magnitude.

    The diagonal passes through unconditionally.
    """
    thr = float(thr)
    if thr < 0:
        raise ParameterError(f"threshold must be non-negative, got {thr}")
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"matrix must be square, got {S.shape}")
    out = np.where(np.abs(S) < thr, 0.0, S)
    np.fill_diagonal(out, np.diag(S))
    return out


def factor_covariance(fit: FactorFit, window: int, C: float) -> np.ndarray:
    """Covariance estimate from a factor fit on a ``window``-month panel.

    Common-component covariance plus the residual covariance hard
    thresholded at C * sqrt(log N / window).  If the smallest eigenvalue
    falls below 1e-8 * trace / N, eigenvalues are clipped up to that
    floor so downstream solves stay positive definite.
    """
    window = int(window)
    if fit.n_times != window:
        raise DimensionError(
            f"fit covers {fit.n_times} months, window is {window}"
        )
    if not C > 0:
        raise ParameterError("threshold constant must be positive")
    n = fit.n_series
    L, F, E = fit.loadings, fit.factors, fit.residuals
    common_cov = L @ (F.T @ F) @ L.T / window
    resid_cov = E @ E.T / window
    thr = C * math.sqrt(math.log(n) / window)
    sigma = common_cov + hard_threshold(resid_cov, thr)
    sigma = (sigma + sigma.T) / 2.0
    floor = 1e-8 * float(np.trace(sigma)) / n
    vals, vecs = np.linalg.eigh(sigma)
    if vals[0] < floor:
        vals = np.maximum(vals, floor)
        sigma = (vecs * vals) @ vecs.T
        sigma = (sigma + sigma.T) / 2.0
    return sigma


def min_variance_weights(Sigma) -> np.ndarray:
    """Budget-constrained minimum-variance weights Sigma^-1 1 / (1'Sigma^-1 1)."""
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1]:
        raise DimensionError(f"covariance must be square, got {Sigma.shape}")
    scale = max(1.0, float(np.max(np.abs(Sigma))))
    if np.max(np.abs(Sigma - Sigma.T)) > 1e-10 * scale:
        raise ParameterError("covariance must be symmetric")
    try:
        factor = sla.cho_factor(Sigma, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"covariance is not positive definite: {exc}")
    ones = np.ones(Sigma.shape[0])
    x = sla.cho_solve(factor, ones, check_finite=False)
    total = float(ones @ x)
    if not np.isfinite(total) or total == 0.0:
        raise DefinitenessError("covariance produced a degenerate budget solve")
    return x / total


def performance_stats(returns) -> PerfStats:
    """Mean, sample sd, unannualized Sharpe, and linear-interp quantiles.

    With a single observation or zero dispersion the Sharpe (and for a
    single observation the sd) is None rather than an exception.
    """
    x = np.asarray(returns, dtype=float).ravel()
    if x.size < 1:
        raise DimensionError("need at least one return")
    if not np.all(np.isfinite(x)):
        raise DataError("returns contain non-finite values")
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1)) if x.size >= 2 else None
    sharpe = mean / sd if sd is not None and sd > 0 else None
    qs = {
        tau: float(np.quantile(x, tau, method="linear")) for tau in QUANTILE_LEVELS
    }
    return PerfStats(mean, sd, sharpe, qs)


def _fit_window(method: str, panel: Panel, r: int, huber: HuberConfig) -> FactorFit:
    if method == "pca":
        return fit_pca(panel, r)
    if method == "hpca":
        return fit_hpca(panel, r, HpcaConfig())
    return fit_ihr(panel, r, IhrConfig(huber=huber))


def rolling_backtest(
    returns: Panel, cfg: BacktestConfig, threads: int = 1
) -> BacktestReport:
    """Walk the panel, refitting every month on the trailing window.

    For each month t past the initial window: fit on months
    [t - window, t), build the covariance, take minimum-variance
    weights, and realize w'Y_t.  Months whose covariance is not
    positive definite even after repair are skipped and listed in the
    report.  Transaction costs are ignored.
    """
    T = returns.n_times
    if T <= cfg.window:
        raise DimensionError(
            f"panel has {T} months; need more than the window {cfg.window}"
        )
    if cfg.r > min(returns.n_series, cfg.window):
        raise DimensionError("rank exceeds what the window can support")
    Y = returns.values

    def one(t: int):
        sub = Panel(
            Y[:, t - cfg.window : t],
            returns.series_ids,
            returns.time_ids[t - cfg.window : t],
        )
        fit = _fit_window(cfg.method, sub, cfg.r, cfg.huber)
        sigma = factor_covariance(fit, cfg.window, cfg.threshold_const)
        try:
            w = min_variance_weights(sigma)
        except DefinitenessError:
            return None
        return w, float(w @ Y[:, t])

    months = list(range(cfg.window, T))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, months))
    else:
        outcomes = [one(t) for t in months]

    time_ids, rets, weights, skipped = [], [], [], []
    for t, res in zip(months, outcomes):
        if res is None:
            skipped.append(returns.time_ids[t])
            continue
        w, ret = res
        time_ids.append(returns.time_ids[t])
        rets.append(ret)
        weights.append(w)
    if not rets:
        raise DataError("every month was skipped; no out-of-sample returns")
    stats = performance_stats(rets)
    return BacktestReport(
        time_ids=time_ids,
        oos_returns=np.array(rets),
        mean_return=stats.mean,
        sd_return=stats.sd,
        sharpe=stats.sharpe,
        quantiles=stats.quantiles,
        skipped=skipped,
        weights=np.array(weights),
    )
