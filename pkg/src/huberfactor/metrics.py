"""Accuracy metrics and the seeded Monte Carlo harness.

``subspace_distance`` compares column spaces of orthonormal matrices on
a [0, 1] scale.  ``run_monte_carlo`` repeats generate-fit-score cycles
over derived seeds and aggregates medians/IQRs for the common-component
error and means/standard deviations for the subspace distances, or
factor-number counts for rank studies.  ``normality_probe`` checks the
shape of the Monte Carlo distribution of one series' loading estimates.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .errors import DataError, DimensionError, ParameterError
from .estimators import HpcaConfig, IhrConfig, fit_hpca, fit_ihr, fit_pca
from .panel import FactorFit, normalize_fit
from .rank import estimate_rank_er, estimate_rank_rm
from .simulate import GroundTruth, SimConfig, gen_scenario

__all__ = [
    "McReport",
    "subspace_distance",
    "replication_errors",
    "run_monte_carlo",
    "normality_probe",
    "ACCURACY_METHODS",
    "RANK_METHODS",
]

ACCURACY_METHODS = ("pca", "hpca", "ihr")
RANK_METHODS = ("rm-hpca", "rm-ihr", "er")

_ACCURACY_CSV = "method,mee_cc,mee_cc_iqr,ave_fl,ave_fl_sd,ave_fs,ave_fs_sd"
_RANK_CSV = "method,mean_rhat,under,over"


def subspace_distance(O1, O2) -> float:
    """Distance between the column spaces of two orthonormal matrices.

    D = sqrt(1 - Tr(O1 O1' O2 O2') / max(q1, q2)), which is 0 when the
    spaces coincide and 1 when they are orthogonal.
    """
    O1 = np.asarray(O1, dtype=float)
    O2 = np.asarray(O2, dtype=float)
    if O1.ndim == 1:
        O1 = O1[:, None]
    if O2.ndim == 1:
        O2 = O2[:, None]
    if O1.shape[0] != O2.shape[0]:
        raise DimensionError(
            f"row counts disagree: {O1.shape[0]} vs {O2.shape[0]}"
        )
    for name, O in (("first", O1), ("second", O2)):
        gram = O.T @ O
        if np.max(np.abs(gram - np.eye(O.shape[1]))) > 1e-8:
            raise ParameterError(f"{name} argument is not column-orthonormal")
    q = max(O1.shape[1], O2.shape[1])
    overlap = float(np.sum((O1.T @ O2) ** 2))
    return float(np.sqrt(max(0.0, 1.0 - overlap / q)))


def _orthonormal_basis(M: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.asarray(M, dtype=float))
    return q


def replication_errors(fit: FactorFit, truth: GroundTruth) -> tuple[float, float, float]:
    """Per-replication error triple (cc_err, fl_dist, fs_dist).

    cc_err is the squared relative Frobenius error of the common
    component; the two distances compare the spans of estimated and
    true loadings and factors after orthonormalization.
    """
    L0, F0 = truth.loadings, truth.factors
    if fit.loadings.shape[0] != L0.shape[0] or fit.factors.shape[0] != F0.shape[0]:
        raise DimensionError("fit and truth disagree in panel dimensions")
    C0 = L0 @ F0.T
    denom = float(np.sum(C0 * C0))
    if denom == 0.0:
        raise DataError("true common component is zero; relative error undefined")
    diff = fit.common_component() - C0
    cc_err = float(np.sum(diff * diff)) / denom
    fl = subspace_distance(_orthonormal_basis(fit.loadings), _orthonormal_basis(L0))
    fs = subspace_distance(_orthonormal_basis(fit.factors), _orthonormal_basis(F0))
    return cc_err, fl, fs


@dataclass(frozen=True)
class McReport:
    """Aggregated Monte Carlo results.

    ``mode`` is "accuracy" (per-method mee_cc/ave_fl/ave_fs summaries)
    or "rank" (per-method mean_rhat and under/over counts).  Dispersion
    fields are None when fewer than two replications succeeded.
    """

    mode: str
    methods: dict
    replications: int
    seeds: list
    failures: list

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "methods": self.methods,
            "replications": self.replications,
            "seeds": [int(s) for s in self.seeds],
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    def to_csv(self) -> str:
        def cell(v):
            return "" if v is None else repr(float(v))

        if self.mode == "accuracy":
            lines = [_ACCURACY_CSV]
            for name, m in self.methods.items():
                lines.append(
                    ",".join(
                        [
                            name,
                            cell(m["mee_cc"]),
                            cell(m["mee_cc_iqr"]),
                            cell(m["ave_fl"]),
                            cell(m["ave_fl_sd"]),
                            cell(m["ave_fs"]),
                            cell(m["ave_fs_sd"]),
                        ]
                    )
                )
        else:
            lines = [_RANK_CSV]
            for name, m in self.methods.items():
                lines.append(
                    ",".join(
                        [
                            name,
                            cell(m["mean_rhat"]),
                            str(m["under_count"]),
                            str(m["over_count"]),
                        ]
                    )
                )
        return "\n".join(lines) + "\n"


def _derive_seeds(master_seed, m: int) -> list[int]:
    state = np.random.SeedSequence(master_seed).generate_state(m, dtype=np.uint64)
    return [int(s) for s in state]


def _fit_method(name, panel, r, hpca_cfg, ihr_cfg):
    if name == "pca":
        return fit_pca(panel, r)
    if name == "hpca":
        return fit_hpca(panel, r, hpca_cfg)
    if name == "ihr":
        return fit_ihr(panel, r, ihr_cfg)
    raise ParameterError(f"unknown method {name!r}")


def _rank_method(name, panel, k, P, hpca_cfg, ihr_cfg):
    if name == "rm-hpca":
        return estimate_rank_rm(panel, k, "hpca", P, hpca_cfg=hpca_cfg)
    if name == "rm-ihr":
        return estimate_rank_rm(panel, k, "ihr", P, ihr_cfg=ihr_cfg)
    if name == "er":
        return estimate_rank_er(panel, k)
    raise ParameterError(f"unknown method {name!r}")


def run_monte_carlo(
    cfg: SimConfig,
    methods,
    M: int,
    master_seed=0,
    k: int = 8,
    P: float | None = None,
    replication_seeds=None,
    threads: int = 1,
    hpca_cfg: HpcaConfig | None = None,
    ihr_cfg: IhrConfig | None = None,
) -> McReport:
    """Run M seeded replications of generate-fit-score and aggregate.

    ``cfg`` is the panel template; its seed field is replaced by a seed
    derived from ``master_seed`` for each replication (or taken from
    ``replication_seeds`` when given, mainly for tests).  ``methods``
    must be all accuracy methods (pca/hpca/ihr) or all rank methods
    (rm-hpca/rm-ihr/er); rank methods use ``k`` (fit rank, or the
    eigenvalue-ratio search bound) and cut ``P``.  Failed replications
    are excluded from aggregates and recorded under ``failures``.
    """
    methods = list(methods)
    if M < 1:
        raise ParameterError("M must be at least 1")
    if not methods:
        raise ParameterError("need at least one method")
    is_rank = all(m in RANK_METHODS for m in methods)
    is_acc = all(m in ACCURACY_METHODS for m in methods)
    if not (is_rank or is_acc):
        raise ParameterError(
            f"methods must all come from {ACCURACY_METHODS} or all from "
            f"{RANK_METHODS}, got {methods}"
        )
    if replication_seeds is None:
        seeds = _derive_seeds(master_seed, M)
    else:
        seeds = [int(s) for s in replication_seeds]
        if len(seeds) != M:
            raise DimensionError(f"{len(seeds)} seeds for {M} replications")

    def one(seed: int):
        truth = gen_scenario(replace(cfg, seed=seed))
        out = {}
        errors = {}
        for name in methods:
            try:
                if is_rank:
                    est = _rank_method(name, truth.panel, k, P, hpca_cfg, ihr_cfg)
                    out[name] = est.r_hat
                else:
                    fit = _fit_method(name, truth.panel, cfg.r, hpca_cfg, ihr_cfg)
                    out[name] = replication_errors(fit, truth)
            except Exception as exc:  # recorded, never fatal to the study
                errors[name] = f"{type(exc).__name__}: {exc}"
        return out, errors

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]

    failures = []
    for seed, (_, errors) in zip(seeds, results):
        for name, msg in errors.items():
            failures.append({"seed": int(seed), "method": name, "error": msg})

    summary = {}
    for name in methods:
        vals = [res[0][name] for res in results if name in res[0]]
        if is_rank:
            rhats = np.array(vals, dtype=float)
            summary[name] = {
                "mean_rhat": float(np.mean(rhats)) if rhats.size else None,
                "under_count": int(np.sum(rhats < cfg.r)),
                "over_count": int(np.sum(rhats > cfg.r)),
                "successes": int(rhats.size),
            }
        else:
            arr = np.array(vals, dtype=float).reshape(-1, 3)
            cc, fl, fs = arr[:, 0], arr[:, 1], arr[:, 2]
            n_ok = arr.shape[0]
            summary[name] = {
                "mee_cc": float(np.median(cc)) if n_ok else None,
                "mee_cc_iqr": (
                    float(np.quantile(cc, 0.75) - np.quantile(cc, 0.25))
                    if n_ok
                    else None
                ),
                "ave_fl": float(np.mean(fl)) if n_ok else None,
                "ave_fl_sd": float(np.std(fl, ddof=1)) if n_ok > 1 else None,
                "ave_fs": float(np.mean(fs)) if n_ok else None,
                "ave_fs_sd": float(np.std(fs, ddof=1)) if n_ok > 1 else None,
                "successes": n_ok,
            }
    return McReport(
        mode="rank" if is_rank else "accuracy",
        methods=summary,
        replications=M,
        seeds=seeds,
        failures=failures,
    )


def normality_probe(
    cfg: SimConfig,
    i: int,
    M: int,
    master_seed=0,
    ihr_cfg: IhrConfig | None = None,
    threads: int = 1,
) -> tuple[np.ndarray, float]:
    """Monte Carlo shape check for one series' loading estimates.

    Collects sqrt(T) * (l_hat_i - (L R)_i) across M replications, where
    L is the normalized truth and R is the orthogonal rotation of it
    closest to the fitted loadings in Frobenius norm.  When the factor
    strengths are well separated R degenerates to per-factor sign
    flips; solving for the full rotation keeps the pairing well defined
    when strengths tie and per-factor matching becomes arbitrary.
    Returns the componentwise standardized means and the minimum over
    components of the normal quantile-quantile correlation.  Scenarios
    whose innovations lack second moments are refused: the sampling
    distribution being probed presumes them.
    """
    if M < 2:
        raise ParameterError("need at least two replications to standardize")
    if cfg.dist in ("alpha_stable", "skewt_stable"):
        raise ParameterError(
            f"dist {cfg.dist!r} has infinite variance; the probe requires "
            "innovations with bounded second moments"
        )
    if cfg.dist in ("mvt", "mvt_errors") and cfg.nu <= 2:
        raise ParameterError(
            f"t innovations with nu = {cfg.nu} lack second moments"
        )
    if not 0 <= i < cfg.n:
        raise DimensionError(f"series index {i} outside [0, {cfg.n})")

    seeds = _derive_seeds(master_seed, M)
    root_t = np.sqrt(cfg.t)

    def one(seed: int) -> np.ndarray:
        truth = gen_scenario(replace(cfg, seed=seed))
        fit = fit_ihr(truth.panel, cfg.r, ihr_cfg)
        L0, _ = normalize_fit(truth.loadings, truth.factors)
        U, _, Vt = np.linalg.svd(L0.T @ fit.loadings)
        aligned = L0 @ (U @ Vt)
        return root_t * (fit.loadings[i] - aligned[i])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, seeds))
    else:
        rows = [one(s) for s in seeds]
    dev = np.vstack(rows)

    mean_z = dev.mean(axis=0) / dev.std(axis=0, ddof=1)
    order_probs = (np.arange(1, M + 1) - 0.375) / (M + 0.25)
    theo = stats.norm.ppf(order_probs)
    qq = [
        float(np.corrcoef(np.sort(dev[:, j]), theo)[0, 1])
        for j in range(dev.shape[1])
    ]
    return mean_z, float(min(qq))
