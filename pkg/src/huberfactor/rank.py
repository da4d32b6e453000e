"""Factor-number selection.

Two families: rank minimization, which fits a deliberately over-specified
model with k factors and counts how many diagonal entries of F'F/T stay
above the vanishing fraction P of the leading entry, and the
eigenvalue-ratio selector, which picks the index maximizing the ratio of
successive eigenvalues of the unweighted second moment.  Both decisions
are invariant to a global rescaling of the panel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .estimators import HpcaConfig, IhrConfig, fit_hpca, fit_ihr
from .panel import Panel, second_moment

__all__ = [
    "RankEstimate",
    "default_threshold",
    "rank_from_diag",
    "estimate_rank_rm",
    "estimate_rank_er",
]


@dataclass(frozen=True)
class RankEstimate:
    """A factor-number estimate with its diagnostic spectrum.

    ``sigma_diag`` holds the non-increasing diagnostic values the
    decision was read from: the diagonal of F'F/T for rank-minimization
    methods, eigenvalues of the second moment divided by N for the
    eigenvalue-ratio method.  ``threshold`` is the effective cut the
    entries were compared against (the requested fraction P times the
    leading entry) for rank-minimization methods and None otherwise, so
    ``r_hat == sum(sigma_diag > threshold)`` always holds for them.
    """

    r_hat: int
    sigma_diag: np.ndarray
    threshold: float | None
    method: str

    def __post_init__(self):
        diag = np.asarray(self.sigma_diag, dtype=float)
        if diag.ndim != 1:
            raise DimensionError("sigma_diag must be 1-d")
        slack = 1e-10 * max(1.0, float(np.max(np.abs(diag), initial=0.0)))
        if np.any(np.diff(diag) > slack):
            raise ParameterError("sigma_diag must be non-increasing")
        if self.method.startswith("rm_"):
            if self.threshold is None or not self.threshold > 0:
                raise ParameterError("rank-minimization methods require P > 0")
        if not 0 <= self.r_hat <= diag.size:
            raise ParameterError(
                f"r_hat {self.r_hat} outside [0, {diag.size}]"
            )
        object.__setattr__(self, "sigma_diag", diag)
        object.__setattr__(self, "r_hat", int(self.r_hat))

    def to_dict(self) -> dict:
        return {
            "r_hat": self.r_hat,
            "sigma_diag": [float(v) for v in self.sigma_diag],
            "threshold": None if self.threshold is None else float(self.threshold),
            "method": self.method,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)


def default_threshold(n: int, t: int) -> float:
    """Vanishing fraction P = min(N, T)^(-1/3)."""
    n, t = int(n), int(t)
    if n < 1 or t < 1:
        raise ParameterError("dimensions must be positive")
    return float(min(n, t) ** (-1.0 / 3.0))


def rank_from_diag(sigma_diag, P: float) -> int:
    """Count diagonal entries above the cut; diagnostic entry point."""
    if not P > 0:
        raise ParameterError(f"P must be positive, got {P}")
    diag = np.asarray(sigma_diag, dtype=float)
    return int(np.sum(diag > P))


def estimate_rank_rm(
    panel: Panel,
    k: int,
    method: str = "hpca",
    P: float | None = None,
    hpca_cfg: HpcaConfig | None = None,
    ihr_cfg: IhrConfig | None = None,
) -> RankEstimate:
    """Rank-minimization estimate from an over-specified fit.

    Fits ``method`` ("hpca" or "ihr") with rank ``k``, which the caller
    should choose above the suspected true rank, then counts diagonal
    entries of F'F/T exceeding the fraction ``P`` (default
    ``default_threshold``) of the leading entry.  Cutting at a fraction
    rather than an absolute level makes the estimate invariant to the
    observation scale, so heavy-tailed panels whose second moments sit
    far above unit size are read the same way as standardized ones.
    """
    k = int(k)
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    if k > min(panel.n_series, panel.n_times):
        raise DimensionError(
            f"k = {k} exceeds min(N, T) = {min(panel.n_series, panel.n_times)}"
        )
    if P is None:
        P = default_threshold(panel.n_series, panel.n_times)
    elif not P > 0:
        raise ParameterError(f"P must be positive, got {P}")
    if method == "hpca":
        fit = fit_hpca(panel, k, hpca_cfg)
    elif method == "ihr":
        fit = fit_ihr(panel, k, ihr_cfg)
    else:
        raise ParameterError(f"unknown rank-minimization method {method!r}")
    diag = fit.factor_second_moment_diag()
    lead = float(diag[0]) if diag.size and diag[0] > 0 else 1.0
    cut = float(P) * lead
    return RankEstimate(rank_from_diag(diag, cut), diag, cut, f"rm_{method}")


def estimate_rank_er(panel: Panel, k_max: int) -> RankEstimate:
    """Eigenvalue-ratio estimate: argmax_j lambda_j / lambda_(j+1).

    Needs ``k_max + 1`` eigenvalues, so ``k_max + 1 <= min(N, T)``.
    A zero eigenvalue inside the range makes the preceding ratio
    infinite, which wins the argmax at the smallest such index.
    """
    k_max = int(k_max)
    if k_max < 1:
        raise ParameterError(f"k_max must be positive, got {k_max}")
    if k_max + 1 > min(panel.n_series, panel.n_times):
        raise DimensionError(
            f"k_max + 1 = {k_max + 1} exceeds min(N, T) = "
            f"{min(panel.n_series, panel.n_times)}"
        )
    vals = np.linalg.eigvalsh(second_moment(panel))[::-1]
    lead = vals[:k_max]
    trail = vals[1 : k_max + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(trail > 0, lead / np.where(trail > 0, trail, 1.0), np.inf)
    r_hat = int(np.argmax(ratios)) + 1
    diag = vals[: k_max + 1] / panel.n_series
    return RankEstimate(r_hat, diag, None, "er")
