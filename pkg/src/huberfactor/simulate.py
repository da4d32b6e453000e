"""Synthetic factor panels with controllable tails and correlation.

The generator builds Y = L F' + sqrt(theta) U where the loadings are
standard normal, the factors and error innovations follow a selectable
law (Gaussian, elliptical t, element-wise alpha-stable, or skew-t
factors with stable errors), and the idiosyncratic part U carries AR(1)
serial correlation (rho) plus a moving-average spillover across the
nearest J series (weight beta).  The scaling of U makes interior series
have unit variance whenever the innovations do.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .panel import Panel

__all__ = [
    "SimConfig",
    "GroundTruth",
    "gen_alpha_stable",
    "gen_mvt",
    "gen_skew_t",
    "gen_scenario",
    "scenario_config",
    "save_ground_truth",
]

BURN_IN = 50

_DISTS = ("gaussian", "mvt", "mvt_errors", "alpha_stable", "skewt_stable")


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one synthetic panel.

    ``dist`` selects the innovation law for the joint draw of factors
    f_t and error innovations v_t:

    - ``gaussian``: both standard normal.
    - ``mvt``: jointly elliptical t(nu); one mixing variable per time
      point is shared by f_t and v_t.
    - ``mvt_errors``: Gaussian factors, elliptical t(nu) errors.
    - ``alpha_stable``: every element i.i.d. symmetric alpha-stable.
    - ``skewt_stable``: factor elements i.i.d. skew-t(nu, skew), error
      elements i.i.d. symmetric alpha-stable.
    """

    n: int
    t: int
    r: int = 3
    theta: float = 1.0
    rho: float = 0.0
    beta: float = 0.0
    j_width: int = 0
    dist: str = "gaussian"
    nu: float | None = None
    alpha: float | None = None
    skew: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.t < 1:
            raise ParameterError("panel dimensions must be positive")
        if self.r < 1:
            raise ParameterError("r must be positive")
        if self.theta < 0:
            raise ParameterError("theta must be non-negative")
        if not 0 <= self.rho < 1:
            raise ParameterError("rho must lie in [0, 1)")
        if not 0 <= self.beta < 1:
            raise ParameterError("beta must lie in [0, 1)")
        if self.j_width < 0 or self.j_width > self.n:
            raise ParameterError("J must lie in [0, N]")
        if self.dist not in _DISTS:
            raise ParameterError(f"unknown dist {self.dist!r}")
        if self.dist in ("mvt", "mvt_errors", "skewt_stable"):
            if self.nu is None or not self.nu > 0:
                raise ParameterError(f"dist {self.dist!r} requires nu > 0")
        if self.dist in ("alpha_stable", "skewt_stable"):
            if self.alpha is None or not 0 < self.alpha <= 2:
                raise ParameterError(f"dist {self.dist!r} requires alpha in (0, 2]")
        if self.dist == "skewt_stable" and self.skew is None:
            raise ParameterError("dist 'skewt_stable' requires skew")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "t": self.t,
            "r": self.r,
            "theta": self.theta,
            "rho": self.rho,
            "beta": self.beta,
            "j_width": self.j_width,
            "dist": self.dist,
            "nu": self.nu,
            "alpha": self.alpha,
            "skew": self.skew,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class GroundTruth:
    """A generated panel together with the loadings and factors behind it."""

    loadings: np.ndarray
    factors: np.ndarray
    panel: Panel


def gen_alpha_stable(alpha, skew=0.0, scale=1.0, loc=0.0, rng=None, size=None):
    """Alpha-stable draws via the Chambers-Mallows-Stuck transform.

    One uniform on (-pi/2, pi/2) and one unit exponential per draw.
    ``alpha = 2`` reduces to a Gaussian with variance 2 * scale^2.
    Returns a scalar when ``size`` is None, else an array.
    """
    alpha = float(alpha)
    skew = float(skew)
    scale = float(scale)
    if not 0 < alpha <= 2:
        raise ParameterError(f"alpha must lie in (0, 2], got {alpha}")
    if not -1 <= skew <= 1:
        raise ParameterError(f"skew must lie in [-1, 1], got {skew}")
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    if rng is None:
        rng = np.random.default_rng()
    shape = () if size is None else size
    u = rng.uniform(-math.pi / 2, math.pi / 2, shape)
    w = rng.standard_exponential(shape)
    if alpha == 1.0:
        half = math.pi / 2
        x = (
            (half + skew * u) * np.tan(u)
            - skew * np.log((half * w * np.cos(u)) / (half + skew * u))
        ) / half
        out = scale * x + loc + (2.0 / math.pi) * skew * scale * math.log(scale)
    else:
        theta0 = math.atan(skew * math.tan(math.pi * alpha / 2.0)) / alpha
        num = np.sin(alpha * (u + theta0))
        den = np.cos(u) ** (1.0 / alpha)
        tail = (np.cos(u - alpha * (u + theta0)) / w) ** ((1.0 - alpha) / alpha)
        x = (num / den) * tail * (1.0 + math.tan(math.pi * alpha / 2.0) ** 2 * skew**2) ** (
            1.0 / (2.0 * alpha)
        )
        out = scale * x + loc
    return out if size is not None else float(out)


def gen_mvt(nu, dim, rng=None):
    """One draw of a centralized elliptical t: z / sqrt(w / nu).

    All ``dim`` coordinates share a single chi-squared(nu) mixing
    variable, so the coordinates are uncorrelated but dependent.
    """
    nu = float(nu)
    if not nu > 0:
        raise ParameterError(f"nu must be positive, got {nu}")
    dim = int(dim)
    if dim < 1:
        raise ParameterError(f"dim must be positive, got {dim}")
    if rng is None:
        rng = np.random.default_rng()
    w = rng.chisquare(nu)
    z = rng.standard_normal(dim)
    return z / math.sqrt(w / nu)


def gen_skew_t(nu, alpha_skew, rng=None, size=None):
    """Skew-t draws via hidden truncation.

    With delta = a / sqrt(1 + a^2), draw (u0, u1) bivariate normal with
    correlation delta, keep u1 when u0 > 0 and -u1 otherwise, then
    divide by sqrt(w / nu).  ``alpha_skew = 0`` recovers the symmetric
    t(nu) law.
    """
    nu = float(nu)
    if not nu > 0:
        raise ParameterError(f"nu must be positive, got {nu}")
    a = float(alpha_skew)
    if rng is None:
        rng = np.random.default_rng()
    delta = a / math.sqrt(1.0 + a * a)
    shape = () if size is None else size
    z0 = rng.standard_normal(shape)
    z1 = rng.standard_normal(shape)
    u1 = delta * z0 + math.sqrt(1.0 - delta * delta) * z1
    z = np.where(z0 > 0, u1, -u1)
    w = rng.chisquare(nu, shape)
    out = z / np.sqrt(w / nu)
    return out if size is not None else float(out)


def _draw_innovations(cfg: SimConfig, t_total: int, rng_fac, rng_err):
    """Factors (T, r) and error innovations (N, t_total) per cfg.dist.

    The error stream covers the burn-in period; factors exist only for
    the T retained time points.  Under ``mvt`` the retained periods
    share their mixing variable between factors and errors.
    """
    n, t, r = cfg.n, cfg.t, cfg.r
    burn = t_total - t
    if cfg.dist == "gaussian":
        v = rng_err.standard_normal((t_total, n))
        f = rng_fac.standard_normal((t, r))
    elif cfg.dist == "mvt":
        w = rng_err.chisquare(cfg.nu, t_total)
        zv = rng_err.standard_normal((t_total, n))
        root = np.sqrt(w / cfg.nu)
        v = zv / root[:, None]
        zf = rng_fac.standard_normal((t, r))
        f = zf / root[burn:, None]
    elif cfg.dist == "mvt_errors":
        w = rng_err.chisquare(cfg.nu, t_total)
        zv = rng_err.standard_normal((t_total, n))
        v = zv / np.sqrt(w / cfg.nu)[:, None]
        f = rng_fac.standard_normal((t, r))
    elif cfg.dist == "alpha_stable":
        v = gen_alpha_stable(cfg.alpha, 0.0, 1.0, 0.0, rng_err, size=(t_total, n))
        f = gen_alpha_stable(cfg.alpha, 0.0, 1.0, 0.0, rng_fac, size=(t, r))
    else:  # skewt_stable
        v = gen_alpha_stable(cfg.alpha, 0.0, 1.0, 0.0, rng_err, size=(t_total, n))
        f = gen_skew_t(cfg.nu, cfg.skew, rng_fac, size=(t, r))
    return f, v.T


def _spillover(v: np.ndarray, beta: float, j_width: int) -> np.ndarray:
    """(1 - beta) v_i + beta * sum of v over the J-neighborhood of i.

    The window includes i itself, so the net coefficient on v_i is 1.
    """
    if j_width == 0 or beta == 0.0:
        # The window degenerates to {i} (or beta kills it), so the
        # innovation is v itself.
        return v
    n = v.shape[0]
    csum = np.cumsum(v, axis=0)
    idx = np.arange(n)
    hi = np.minimum(idx + j_width, n - 1)
    lo = np.maximum(idx - j_width, 0)
    window = csum[hi] - np.where(lo[:, None] > 0, csum[np.maximum(lo - 1, 0)], 0.0)
    return (1.0 - beta) * v + beta * window


def gen_scenario(cfg: SimConfig) -> GroundTruth:
    """Generate one panel deterministically from ``cfg.seed``.

    The master seed splits into independent substreams for loadings,
    factors, and errors, so changing one block of draws cannot perturb
    the others.  The AR(1) recursion runs 50 burn-in steps from zero
    before the T retained periods.
    """
    ss = np.random.SeedSequence(cfg.seed)
    kids = ss.spawn(3)
    rng_load = np.random.default_rng(kids[0])
    rng_fac = np.random.default_rng(kids[1])
    rng_err = np.random.default_rng(kids[2])

    L = rng_load.standard_normal((cfg.n, cfg.r))
    t_total = cfg.t + BURN_IN
    F, v = _draw_innovations(cfg, t_total, rng_fac, rng_err)

    innov = _spillover(v, cfg.beta, cfg.j_width)
    e = np.empty_like(innov)
    prev = np.zeros(cfg.n)
    for t in range(t_total):
        prev = cfg.rho * prev + innov[:, t]
        e[:, t] = prev
    scale = math.sqrt((1.0 - cfg.rho**2) / (1.0 + 2.0 * cfg.j_width * cfg.beta**2))
    u = scale * e[:, BURN_IN:]

    Y = L @ F.T + math.sqrt(cfg.theta) * u
    return GroundTruth(L, F, Panel.from_values(Y))


def scenario_config(
    scenario: str,
    case: int,
    n: int,
    t: int,
    seed: int,
    r: int = 3,
    theta: float = 1.0,
) -> SimConfig:
    """Resolve a scenario letter and case number into a SimConfig.

    Scenarios A and C draw serially and cross-sectionally uncorrelated
    errors; B and D add rho = 0.5, beta = 0.2, J = max(10, floor(N/20)).
    Cases for A/B: 1 Gaussian, 2 joint t(3), 3 Gaussian factors with
    t(3) errors, 4 alpha-stable(1.9), 5 skew-t(20, 3) factors with
    alpha-stable(1.9) errors.  Cases for C/D: 1 Gaussian, 2 joint t(5),
    3 joint t(3).
    """
    scenario = str(scenario).upper()
    case = int(case)
    correlated = {"A": False, "B": True, "C": False, "D": True}
    if scenario not in correlated:
        raise ParameterError(f"unknown scenario {scenario!r}")
    if scenario in ("A", "B"):
        cases = {
            1: {"dist": "gaussian"},
            2: {"dist": "mvt", "nu": 3.0},
            3: {"dist": "mvt_errors", "nu": 3.0},
            4: {"dist": "alpha_stable", "alpha": 1.9},
            5: {"dist": "skewt_stable", "alpha": 1.9, "skew": 20.0, "nu": 3.0},
        }
    else:
        cases = {
            1: {"dist": "gaussian"},
            2: {"dist": "mvt", "nu": 5.0},
            3: {"dist": "mvt", "nu": 3.0},
        }
    if case not in cases:
        raise ParameterError(
            f"scenario {scenario} has no case {case}; valid: {sorted(cases)}"
        )
    extra = cases[case]
    if correlated[scenario]:
        dyn = {"rho": 0.5, "beta": 0.2, "j_width": max(10, n // 20)}
    else:
        dyn = {"rho": 0.0, "beta": 0.0, "j_width": 0}
    return SimConfig(n=n, t=t, r=r, theta=theta, seed=seed, **dyn, **extra)


def save_ground_truth(gt: GroundTruth, cfg: SimConfig, out_dir) -> None:
    """Write panel.csv, truth_loadings.csv, truth_factors.csv, config.json."""
    os.makedirs(out_dir, exist_ok=True)
    gt.panel.write_csv(os.path.join(out_dir, "panel.csv"))
    cols = ",".join(f"f{j}" for j in range(1, gt.loadings.shape[1] + 1))
    with open(
        os.path.join(out_dir, "truth_loadings.csv"), "w", encoding="utf-8"
    ) as fh:
        fh.write(f"series,{cols}\n")
        for sid, row in zip(gt.panel.series_ids, gt.loadings):
            fh.write(sid + "," + ",".join(repr(float(x)) for x in row) + "\n")
    with open(
        os.path.join(out_dir, "truth_factors.csv"), "w", encoding="utf-8"
    ) as fh:
        fh.write(f"time,{cols}\n")
        for tid, row in zip(gt.panel.time_ids, gt.factors):
            fh.write(tid + "," + ",".join(repr(float(x)) for x in row) + "\n")
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
