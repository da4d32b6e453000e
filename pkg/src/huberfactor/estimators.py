"""The three factor estimators and their shared diagnostics.

``fit_pca`` is the least-squares baseline: eigenvectors of the
unweighted second-moment matrix.  ``fit_hpca`` robustifies it by
down-weighting time points whose residual norm exceeds a threshold
before the eigendecomposition.  ``fit_ihr`` minimizes an element-wise
Huber loss by alternating per-series and per-time robust regressions.
All three return a :class:`~huberfactor.panel.FactorFit` in the
identified parametrization, with estimator diagnostics in ``fit.info``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError
from .huber import HuberConfig, batch_huber_rows, huber_loss, mad_scale
from .panel import FactorFit, Panel, normalize_fit, second_moment, top_eigen

__all__ = [
    "HpcaConfig",
    "IhrConfig",
    "WeightVector",
    "fit_pca",
    "fit_hpca",
    "fit_ihr",
    "hpca_weights",
    "eval_objectives",
    "save_fit",
]

# Threshold floor for the median rule on noiseless panels, where every
# residual norm is zero.
_TAU_FLOOR = 1e-12


@dataclass(frozen=True)
class HpcaConfig:
    """Controls for the weighted-PCA estimator.

    ``refine_iters = 0`` runs the single weighting pass; larger values
    repeat the reweight-and-decompose steps that many extra times, with
    the threshold refreshed from the latest residuals each pass.
    ``tau_rule`` is ``"median"`` (median of per-time residual norms,
    the default) or ``"fixed"`` with an explicit ``tau``.
    """

    refine_iters: int = 0
    tau_rule: str = "median"
    tau: float | None = None

    def __post_init__(self):
        if self.refine_iters < 0:
            raise ParameterError("refine_iters must be non-negative")
        if self.tau_rule not in ("median", "fixed"):
            raise ParameterError(f"unknown tau rule {self.tau_rule!r}")
        if self.tau_rule == "fixed" and (self.tau is None or not self.tau > 0):
            raise ParameterError("fixed tau rule requires tau > 0")


@dataclass(frozen=True)
class IhrConfig:
    """Controls for the alternating Huber-regression estimator."""

    huber: HuberConfig = field(default_factory=HuberConfig)
    outer_max_iter: int = 30
    outer_tol: float = 1e-4

    def __post_init__(self):
        if self.outer_max_iter < 1:
            raise ParameterError("outer_max_iter must be at least 1")
        if not self.outer_tol > 0:
            raise ParameterError("outer_tol must be positive")


@dataclass(frozen=True)
class WeightVector:
    """Per-time-point weights of the robust second moment, in (0, 1/2]."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1:
            raise DimensionError("weights must be 1-d")
        if np.any(w <= 0) or np.any(w > 0.5):
            raise ParameterError("weights must lie in (0, 1/2]")
        object.__setattr__(self, "w", w)


def _check_rank(panel: Panel, r: int) -> int:
    r = int(r)
    if r < 1:
        raise ParameterError(f"rank must be positive, got {r}")
    if r > min(panel.n_series, panel.n_times):
        raise DimensionError(
            f"rank {r} exceeds min(N, T) = {min(panel.n_series, panel.n_times)}"
        )
    return r


def _finalize(panel: Panel, L_raw, F_raw, r: int, info: dict) -> FactorFit:
    L, F = normalize_fit(L_raw, F_raw)
    residuals = panel.values - L @ F.T
    return FactorFit(L, F, residuals, r, info=info)


def fit_pca(panel: Panel, r: int) -> FactorFit:
    """Principal-component fit of rank ``r``.

    Loadings are sqrt(N) times the leading eigenvectors of the
    second-moment matrix; factors are the projections f_t = L'Y_t / N.
    """
    r = _check_rank(panel, r)
    pair = top_eigen(second_moment(panel), r)
    L = np.sqrt(panel.n_series) * pair.vectors
    F = panel.values.T @ L / panel.n_series
    return _finalize(panel, L, F, r, {"method": "pca"})


def _residual_norms(Y: np.ndarray, L: np.ndarray) -> np.ndarray:
    # f_t = L'Y_t/N, so the fitted value is (L L'/N) Y.
    n = L.shape[0]
    fitted = L @ (L.T @ Y) / n
    return np.linalg.norm(Y - fitted, axis=0)


def _weights_from_norms(norms: np.ndarray, tau: float) -> np.ndarray:
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    with np.errstate(divide="ignore"):
        ratio = tau / (2.0 * norms)
    return np.where(norms <= tau, 0.5, ratio)


def hpca_weights(panel: Panel, fit: FactorFit, tau: float) -> WeightVector:
    """KKT weights of the robust second moment at the current fit.

    With rho_t the norm of the time-t residual under the projection
    factors f_t = L'Y_t / N: weight 1/2 when rho_t <= tau, tau/(2 rho_t)
    otherwise.
    """
    if fit.loadings.shape[0] != panel.n_series:
        raise DimensionError("fit and panel disagree in series count")
    norms = _residual_norms(panel.values, fit.loadings)
    return WeightVector(_weights_from_norms(norms, float(tau)))


def fit_hpca(
    panel: Panel,
    r: int,
    cfg: HpcaConfig | None = None,
    init: FactorFit | None = None,
) -> FactorFit:
    """Weighted-PCA fit: robust reweighting of time points, then PCA.

    Each pass computes per-time residual norms under the current
    loadings, sets the threshold (median of those norms by default),
    forms the weighted second moment sum_t w_t Y_t Y_t' / T, and takes
    its leading eigenvectors.  ``cfg.refine_iters`` extra passes reuse
    the latest fit.  ``init`` overrides the default PCA initialization.
    """
    if cfg is None:
        cfg = HpcaConfig()
    r = _check_rank(panel, r)
    if panel.n_times < 2:
        raise DimensionError("need at least two time points")
    Y = panel.values
    n, t = Y.shape
    if init is None:
        L = fit_pca(panel, r).loadings
    else:
        if init.loadings.shape != (n, r):
            raise DimensionError("init fit does not match panel and rank")
        L = init.loadings
    tau = float("nan")
    for _ in range(1 + cfg.refine_iters):
        norms = _residual_norms(Y, L)
        if cfg.tau_rule == "fixed":
            tau = float(cfg.tau)
        else:
            tau = max(float(np.median(norms)), _TAU_FLOOR)
        w = _weights_from_norms(norms, tau)
        S = (Y * w) @ Y.T / t
        pair = top_eigen((S + S.T) / 2.0, r)
        L = np.sqrt(n) * pair.vectors
    F = Y.T @ L / n
    info = {
        "method": "hpca",
        "tau": tau,
        "tau_rule": cfg.tau_rule,
        "refine_iters": cfg.refine_iters,
    }
    return _finalize(panel, L, F, r, info)


def fit_ihr(panel: Panel, r: int, cfg: IhrConfig | None = None) -> FactorFit:
    """Alternating Huber-regression fit minimizing the element-wise loss.

    Starting from the PCA fit, each outer sweep regresses every series
    on the current factors, then every time point on the new loadings,
    renormalizes jointly (the common component is untouched), and stops
    when the relative Frobenius change of the common component drops
    below ``cfg.outer_tol``.  ``fit.info["objective_trace"]`` records
    the element-wise Huber objective after initialization and after
    each sweep at a fixed reference threshold, so descent is checkable.
    """
    if cfg is None:
        cfg = IhrConfig()
    r = _check_rank(panel, r)
    Y = panel.values
    start = fit_pca(panel, r)
    L, F = start.loadings, start.factors

    if cfg.huber.tau_policy == "fixed":
        tau_ref = float(cfg.huber.tau)
    else:
        scale = float(mad_scale(start.residuals.ravel()))
        peak = float(np.max(np.abs(Y))) if Y.size else 1.0
        tau_ref = max(cfg.huber.c * scale, 1e-8 * max(peak, 1.0))

    common = L @ F.T
    trace = [float(np.mean(huber_loss(Y - common, tau_ref)))]
    converged = False
    sweeps = 0
    for _ in range(cfg.outer_max_iter):
        sweeps += 1
        L = batch_huber_rows(Y, F, cfg.huber, init=L, row_kind="series")
        F = batch_huber_rows(Y.T, L, cfg.huber, init=F, row_kind="time")
        L, F = normalize_fit(L, F)
        new_common = L @ F.T
        trace.append(float(np.mean(huber_loss(Y - new_common, tau_ref))))
        denom = max(float(np.linalg.norm(common)), 1e-300)
        rel = float(np.linalg.norm(new_common - common)) / denom
        common = new_common
        if rel < cfg.outer_tol:
            converged = True
            break
    info = {
        "method": "ihr",
        "tau_policy": cfg.huber.tau_policy,
        "tau_ref": tau_ref,
        "iterations": sweeps,
        "converged": converged,
        "objective_trace": trace,
    }
    return FactorFit(L, F, Y - common, r, info=info)


def eval_objectives(panel: Panel, L, F, tau: float) -> tuple[float, float]:
    """Evaluate both robust objectives at (L, F).

    Returns ``(L_H, L_EH)``: the per-time Huber loss of residual column
    norms, (1/T) sum_t H_tau(||Y_t - L f_t||), and the element-wise
    Huber loss, (1/(T N)) sum_it H_tau(Y_it - l_i'f_t).
    """
    tau = float(tau)
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    L = np.asarray(L, dtype=float)
    F = np.asarray(F, dtype=float)
    if L.shape[0] != panel.n_series or F.shape[0] != panel.n_times:
        raise DimensionError("loadings or factors do not match the panel")
    if L.shape[1] != F.shape[1]:
        raise DimensionError("loadings and factors disagree in rank")
    E = panel.values - L @ F.T
    norms = np.linalg.norm(E, axis=0)
    l_h = float(np.mean(huber_loss(norms, tau)))
    l_eh = float(np.mean(huber_loss(E, tau)))
    return l_h, l_eh


def save_fit(fit: FactorFit, out_dir, panel: Panel) -> None:
    """Serialize a fit to ``loadings.csv``, ``factors.csv``, ``meta.json``."""
    os.makedirs(out_dir, exist_ok=True)
    r = fit.rank
    cols = ",".join(f"f{j}" for j in range(1, r + 1))
    with open(os.path.join(out_dir, "loadings.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"series,{cols}\n")
        for sid, row in zip(panel.series_ids, fit.loadings):
            fh.write(sid + "," + ",".join(repr(float(v)) for v in row) + "\n")
    with open(os.path.join(out_dir, "factors.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"time,{cols}\n")
        for tid, row in zip(panel.time_ids, fit.factors):
            fh.write(tid + "," + ",".join(repr(float(v)) for v in row) + "\n")
    info = dict(fit.info or {})
    meta = {
        "method": info.pop("method", None),
        "r": r,
        "converged": info.pop("converged", None),
        "iterations": info.pop("iterations", None),
        "objective_trace": info.pop("objective_trace", None),
    }
    meta.update(info)
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
