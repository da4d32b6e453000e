"""Huber loss primitives and the IRLS solver for a single robust regression.

The loss is quadratic inside [-tau, tau] and linear outside, so its
influence is bounded: observations with residuals beyond tau receive the
down-weighted linear treatment.  ``huber_regress`` minimizes the summed
loss by iteratively reweighted least squares, which is a
majorize-minimize scheme and therefore never increases the objective at
fixed tau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegeneracyError, DimensionError, ParameterError

__all__ = [
    "HuberConfig",
    "HuberRegression",
    "huber_loss",
    "huber_psi",
    "huber_weight",
    "huber_regress",
    "mad_scale",
]

# Consistency factor putting the median absolute deviation on the
# standard-deviation scale for Gaussian data.
MAD_TO_SIGMA = 1.4826

# Classical tuning constant of robust regression routines: 95 per cent
# Gaussian efficiency.
DEFAULT_TUNING = 1.345

_MAD_FLOOR_REL = 1e-8
_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class HuberConfig:
    """Threshold policy and IRLS controls for Huber regressions.

    ``tau_policy`` is either ``"fixed"`` (use ``tau`` as given) or
    ``"mad_scaled"`` (tau = c * 1.4826 * MAD of the current residuals,
    recomputed every IRLS sweep, floored at 1e-8 times the data scale).
    """

    tau_policy: str = "mad_scaled"
    tau: float | None = None
    c: float = DEFAULT_TUNING
    irls_tol: float = 1e-8
    irls_max_iter: int = 100

    def __post_init__(self):
        if self.tau_policy not in ("fixed", "mad_scaled"):
            raise ParameterError(f"unknown tau policy {self.tau_policy!r}")
        if self.tau_policy == "fixed":
            if self.tau is None or not self.tau > 0:
                raise ParameterError("fixed policy requires tau > 0")
        else:
            if not self.c > 0:
                raise ParameterError("mad_scaled policy requires c > 0")
        if not self.irls_tol > 0:
            raise ParameterError("irls_tol must be positive")
        if self.irls_max_iter < 1:
            raise ParameterError("irls_max_iter must be at least 1")

    @classmethod
    def fixed(cls, tau: float, **kwargs) -> "HuberConfig":
        return cls(tau_policy="fixed", tau=float(tau), **kwargs)

    @classmethod
    def mad_scaled(cls, c: float = DEFAULT_TUNING, **kwargs) -> "HuberConfig":
        return cls(tau_policy="mad_scaled", c=float(c), **kwargs)


@dataclass(frozen=True)
class HuberRegression:
    """Result of one Huber regression.

    ``coef`` is the minimizer (best iterate when not converged),
    ``tau`` the threshold in effect at the final sweep, and
    ``objective_trace`` the summed Huber loss of each iterate under
    that iterate's tau, first entry at the initial point.
    """

    coef: np.ndarray
    converged: bool
    iterations: int
    tau: float
    objective_trace: tuple[float, ...]


def _check_tau(tau) -> float:
    tau = float(tau)
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    return tau


def huber_loss(x, tau):
    """Huber loss: x^2/2 inside [-tau, tau], tau|x| - tau^2/2 outside."""
    tau = _check_tau(tau)
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.where(ax <= tau, 0.5 * x * x, tau * ax - 0.5 * tau * tau)
    return out if out.ndim else float(out)


def huber_psi(x, tau):
    """Derivative of the Huber loss: x clipped to [-tau, tau]."""
    tau = _check_tau(tau)
    x = np.asarray(x, dtype=float)
    out = np.clip(x, -tau, tau)
    return out if out.ndim else float(out)


def huber_weight(x, tau):
    """IRLS weight psi(x)/x: 1 inside the threshold, tau/|x| outside.

    Continuous at 0 (weight 1) and always in (0, 1].
    """
    tau = _check_tau(tau)
    x = np.asarray(x, dtype=float)
    out = tau / np.maximum(np.abs(x), tau)
    return out if out.ndim else float(out)


def mad_scale(x, axis=None, keepdims=False):
    """Median absolute deviation about the median, on the sigma scale."""
    x = np.asarray(x, dtype=float)
    med = np.median(x, axis=axis, keepdims=True)
    mad = np.median(np.abs(x - med), axis=axis, keepdims=keepdims)
    return MAD_TO_SIGMA * mad


def _data_scale(y: np.ndarray) -> float:
    peak = float(np.max(np.abs(y))) if y.size else 0.0
    return peak if peak > 0 else 1.0


def _resolve_tau(cfg: HuberConfig, resid: np.ndarray, floor: float) -> float:
    if cfg.tau_policy == "fixed":
        return float(cfg.tau)
    return max(cfg.c * float(mad_scale(resid)), floor)


def huber_regress(y, X, cfg: HuberConfig | None = None, init=None) -> HuberRegression:
    """Minimize sum_i H_tau(y_i - x_i'b) over b by IRLS.

    Parameters
    ----------
    y : array, shape (n,)
    X : array, shape (n, r), full column rank
    cfg : HuberConfig, optional
        Defaults to the mad_scaled policy with c = 1.345.
    init : array, shape (r,), optional
        Starting coefficients; ordinary least squares when omitted.
        The objective is convex, so the minimizer does not depend on
        the start, only the iteration count does.

    Raises
    ------
    DegeneracyError
        If the (weighted) design is rank deficient or its condition
        number exceeds 1e12.  Hitting the iteration cap is not an
        error: the best iterate is returned flagged non-converged.
    """
    if cfg is None:
        cfg = HuberConfig()
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"design must be 2-d, got ndim={X.ndim}")
    n, r = X.shape
    if y.shape[0] != n:
        raise DimensionError(f"y has length {y.shape[0]}, design has {n} rows")
    if n < r:
        raise DimensionError(f"need at least r={r} observations, got {n}")
    if not np.all(np.isfinite(y)):
        raise DataError("y contains non-finite values")
    if not np.all(np.isfinite(X)):
        raise DataError("design contains non-finite values")

    floor = _MAD_FLOOR_REL * _data_scale(y)

    def solve_weighted(w: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        sw = np.sqrt(w)
        b, _, rank, sv = np.linalg.lstsq(X * sw[:, None], rhs * sw, rcond=None)
        if rank < r or sv[0] > _MAX_CONDITION * sv[-1]:
            raise DegeneracyError(
                f"weighted design is rank deficient or ill conditioned (rank {rank})"
            )
        return b

    if init is None:
        b = solve_weighted(np.ones(n), y)
    else:
        b = np.asarray(init, dtype=float).ravel()
        if b.shape[0] != r:
            raise DimensionError(f"init has length {b.shape[0]}, expected {r}")
        # Probe the unweighted design once so rank deficiency surfaces
        # even when a start is supplied.
        solve_weighted(np.ones(n), y)

    resid = y - X @ b
    tau = _resolve_tau(cfg, resid, floor)
    trace = [float(np.sum(huber_loss(resid, tau)))]
    converged = False
    iterations = 0
    for _ in range(cfg.irls_max_iter):
        iterations += 1
        w = huber_weight(resid, tau)
        b_new = solve_weighted(w, y)
        step = float(np.max(np.abs(b_new - b)))
        ref = max(float(np.max(np.abs(b))), 1e-12)
        b = b_new
        resid = y - X @ b
        tau = _resolve_tau(cfg, resid, floor)
        trace.append(float(np.sum(huber_loss(resid, tau))))
        if step < cfg.irls_tol * ref:
            converged = True
            break
    return HuberRegression(b, converged, iterations, tau, tuple(trace))


def batch_huber_rows(
    Y_rows: np.ndarray,
    X: np.ndarray,
    cfg: HuberConfig,
    init: np.ndarray | None = None,
    row_kind: str = "series",
) -> np.ndarray:
    """Solve m independent Huber regressions sharing one design matrix.

    Row i of ``Y_rows`` (shape (m, n)) regresses on ``X`` (shape (n, r));
    the returned matrix stacks the m coefficient vectors.  Semantics per
    row match :func:`huber_regress` (per-row tau under the mad_scaled
    policy), but the normal equations are batched for speed.  Iteration
    stops when every row's coefficient change is below ``irls_tol`` or
    the cap is reached; the cap is not an error.

    A singular or non-finite per-row system raises
    :class:`DegeneracyError` naming the offending row as
    ``f"{row_kind} {i}"``.
    """
    Y_rows = np.asarray(Y_rows, dtype=float)
    X = np.asarray(X, dtype=float)
    m, n = Y_rows.shape
    r = X.shape[1]
    peaks = np.max(np.abs(Y_rows), axis=1)
    floors = _MAD_FLOOR_REL * np.where(peaks > 0, peaks, 1.0)

    def resolve_tau(resid: np.ndarray) -> np.ndarray:
        if cfg.tau_policy == "fixed":
            return np.full(m, float(cfg.tau))
        return np.maximum(cfg.c * mad_scale(resid, axis=1), floors)

    def batch_solve(W: np.ndarray) -> np.ndarray:
        # A[i] = X' diag(W[i]) X, rhs[i] = X' diag(W[i]) y_i
        A = np.einsum("mn,nj,nk->mjk", W, X, X, optimize=True)
        rhs = np.einsum("mn,mn,nj->mj", W, Y_rows, X, optimize=True)
        try:
            B = np.linalg.solve(A, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            B = np.full((m, r), np.nan)
            for i in range(m):
                try:
                    B[i] = np.linalg.solve(A[i], rhs[i])
                except np.linalg.LinAlgError:
                    raise DegeneracyError(
                        f"degenerate regression at {row_kind} {i}"
                    ) from None
        if not np.all(np.isfinite(B)):
            i = int(np.nonzero(~np.isfinite(B).all(axis=1))[0][0])
            raise DegeneracyError(f"degenerate regression at {row_kind} {i}")
        return B

    if init is None:
        B = batch_solve(np.ones((m, n)))
    else:
        B = np.asarray(init, dtype=float).copy()
    resid = Y_rows - B @ X.T
    tau = resolve_tau(resid)
    for _ in range(cfg.irls_max_iter):
        W = np.minimum(1.0, tau[:, None] / np.maximum(np.abs(resid), 1e-300))
        B_new = batch_solve(W)
        step = np.max(np.abs(B_new - B), axis=1)
        ref = np.maximum(np.max(np.abs(B), axis=1), 1e-12)
        B = B_new
        resid = Y_rows - B @ X.T
        tau = resolve_tau(resid)
        if np.all(step < cfg.irls_tol * ref):
            break
    return B
