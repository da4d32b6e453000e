"""Command-line front end.

Subcommands: ``fit``, ``rank``, ``simulate``, ``mc``, ``backtest``.
Every successful run writes ``run.json``, an echo of the fully resolved
configuration (defaults filled in), into the output directory; feeding
that file back through ``--config`` reproduces the run byte for byte.
Flags given on the command line override ``--config`` values, which
override built-in defaults.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import (
    DataError,
    DefinitenessError,
    DegeneracyError,
    DimensionError,
    FactorError,
    ParameterError,
)
from .estimators import HpcaConfig, IhrConfig, fit_hpca, fit_ihr, fit_pca, save_fit
from .figures import save_backtest_figure, save_mc_figure
from .huber import DEFAULT_TUNING, HuberConfig
from .metrics import run_monte_carlo
from .panel import Panel
from .portfolio import BacktestConfig, rolling_backtest
from .rank import estimate_rank_er, estimate_rank_rm
from .simulate import gen_scenario, save_ground_truth, scenario_config

__all__ = ["main"]


def _positive_int(name: str, value) -> int:
    value = int(value)
    if value < 1:
        raise ParameterError(f"{name} must be a positive integer, got {value}")
    return value


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _write_run_echo(out_dir, subcommand: str, cfg: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    echo = {"subcommand": subcommand}
    echo.update(cfg)
    _write_json(os.path.join(out_dir, "run.json"), echo)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="huberfactor",
        description="Robust factor analysis for heavy-tailed panels",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add_common(p):
        p.add_argument("--config", help="run.json from a previous run; "
                       "explicit flags override its values")
        p.add_argument("--out", help="output directory (default: current)")

    p_fit = sub.add_parser("fit", help="fit a factor model to a panel CSV")
    add_common(p_fit)
    p_fit.add_argument("--input", help="panel CSV path")
    p_fit.add_argument("--method", choices=["pca", "hpca", "ihr"])
    p_fit.add_argument("--r", type=int, help="number of factors")
    p_fit.add_argument("--tau", type=float, help="fixed robustness threshold; "
                       "omit for the data-driven default")
    p_fit.add_argument("--c", type=float, help="tuning constant of the "
                       "data-driven threshold (default 1.345)")
    p_fit.add_argument("--refine-iters", type=int, dest="refine_iters",
                       help="extra reweighting passes for hpca (default 0)")

    p_rank = sub.add_parser("rank", help="estimate the number of factors")
    add_common(p_rank)
    p_rank.add_argument("--input", help="panel CSV path")
    p_rank.add_argument("--method", choices=["rm-hpca", "rm-ihr", "er"])
    p_rank.add_argument("--k", type=int, help="over-specified fit rank, or the "
                        "search bound for er")
    p_rank.add_argument("--P", type=float, help="threshold on the factor "
                        "second-moment diagonal (default min(N,T)^(-1/3))")

    p_sim = sub.add_parser("simulate", help="generate a synthetic panel")
    add_common(p_sim)
    p_sim.add_argument("--scenario", choices=["A", "B", "C", "D"])
    p_sim.add_argument("--case", type=int)
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--t", type=int)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--r", type=int, help="number of factors (default 3)")
    p_sim.add_argument("--theta", type=float, help="noise scale (default 1.0)")

    p_mc = sub.add_parser("mc", help="Monte Carlo study over seeded panels")
    add_common(p_mc)
    p_mc.add_argument("--scenario", choices=["A", "B", "C", "D"])
    p_mc.add_argument("--case", type=int)
    p_mc.add_argument("--n", type=int)
    p_mc.add_argument("--t", type=int)
    p_mc.add_argument("--methods", help="comma list: pca,hpca,ihr or "
                      "rm-hpca,rm-ihr,er")
    p_mc.add_argument("--reps", type=int)
    p_mc.add_argument("--seed", type=int)
    p_mc.add_argument("--r", type=int, help="true number of factors (default 3)")
    p_mc.add_argument("--k", type=int, help="fit rank for rank methods (default 8)")
    p_mc.add_argument("--P", type=float, help="rank threshold (default "
                      "min(N,T)^(-1/3))")
    p_mc.add_argument("--theta", type=float)
    p_mc.add_argument("--threads", type=int)
    p_mc.add_argument("--no-figures", dest="figures", action="store_const",
                      const=False, help="skip the PNG report")

    p_bt = sub.add_parser("backtest", help="rolling minimum-variance backtest")
    add_common(p_bt)
    p_bt.add_argument("--input", help="monthly returns panel CSV")
    p_bt.add_argument("--method", choices=["pca", "hpca", "ihr"])
    p_bt.add_argument("--r", type=int, help="number of factors (default 2)")
    p_bt.add_argument("--window", type=int, help="months per fit (default 72)")
    p_bt.add_argument("--thresh-const", type=float, dest="thresh_const",
                      help="residual covariance threshold constant (default 0.5)")
    p_bt.add_argument("--weights", action="store_const", const=True,
                      help="also write per-month weights.csv")
    p_bt.add_argument("--threads", type=int)
    p_bt.add_argument("--no-figures", dest="figures", action="store_const",
                      const=False, help="skip the PNG report")
    return parser


_DEFAULTS = {
    "fit": {
        "input": None, "method": None, "r": None, "tau": None,
        "c": DEFAULT_TUNING, "refine_iters": 0, "out": ".",
    },
    "rank": {
        "input": None, "method": None, "k": None, "P": None, "out": ".",
    },
    "simulate": {
        "scenario": None, "case": None, "n": None, "t": None, "seed": None,
        "r": 3, "theta": 1.0, "out": ".",
    },
    "mc": {
        "scenario": None, "case": None, "n": None, "t": None, "methods": None,
        "reps": None, "seed": None, "r": 3, "k": 8, "P": None, "theta": 1.0,
        "threads": None, "figures": True, "out": ".",
    },
    "backtest": {
        "input": None, "method": None, "r": 2, "window": 72,
        "thresh_const": 0.5, "weights": False, "threads": None,
        "figures": True, "out": ".",
    },
}

_REQUIRED = {
    "fit": ("input", "method", "r"),
    "rank": ("input", "method", "k"),
    "simulate": ("scenario", "case", "n", "t", "seed"),
    "mc": ("scenario", "case", "n", "t", "methods", "reps", "seed"),
    "backtest": ("input", "method"),
}


def _resolve(args: argparse.Namespace) -> dict:
    """Merge CLI flags over --config values over built-in defaults."""
    cmd = args.cmd
    file_cfg = {}
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"config is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise DataError("config must be a JSON object")
        stated = file_cfg.get("subcommand")
        if stated is not None and stated != cmd:
            raise ParameterError(
                f"config was written by subcommand {stated!r}, not {cmd!r}"
            )
    cfg = {}
    for key, default in _DEFAULTS[cmd].items():
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key, default)
        cfg[key] = value
    for key in _REQUIRED[cmd]:
        if cfg[key] is None:
            raise ParameterError(f"--{key.replace('_', '-')} is required")
    return cfg


def _resolve_threads(value) -> int:
    if value is None:
        return os.cpu_count() or 1
    return _positive_int("--threads", value)


def _run_fit(cfg: dict) -> int:
    r = _positive_int("--r", cfg["r"])
    if cfg["tau"] is not None and not cfg["tau"] > 0:
        raise ParameterError(f"--tau must be positive, got {cfg['tau']}")
    panel = Panel.read_csv(cfg["input"])
    method = cfg["method"]
    if method == "pca":
        fit = fit_pca(panel, r)
    elif method == "hpca":
        if cfg["tau"] is None:
            hp = HpcaConfig(refine_iters=int(cfg["refine_iters"]))
        else:
            hp = HpcaConfig(
                refine_iters=int(cfg["refine_iters"]),
                tau_rule="fixed",
                tau=float(cfg["tau"]),
            )
        fit = fit_hpca(panel, r, hp)
    else:
        if cfg["tau"] is None:
            hub = HuberConfig.mad_scaled(float(cfg["c"]))
        else:
            hub = HuberConfig.fixed(float(cfg["tau"]))
        fit = fit_ihr(panel, r, IhrConfig(huber=hub))
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    save_fit(fit, out, panel)
    _write_run_echo(out, "fit", cfg)
    print(f"fit: method={method} r={r} N={panel.n_series} T={panel.n_times}")
    return 0


def _run_rank(cfg: dict) -> int:
    k = _positive_int("--k", cfg["k"])
    if cfg["P"] is not None and not cfg["P"] > 0:
        raise ParameterError(f"--P must be positive, got {cfg['P']}")
    panel = Panel.read_csv(cfg["input"])
    method = cfg["method"]
    if method == "er":
        est = estimate_rank_er(panel, k)
    else:
        est = estimate_rank_rm(panel, k, method.removeprefix("rm-"), cfg["P"])
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    text = est.to_json()
    with open(os.path.join(out, "rank.json"), "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")
    _write_run_echo(out, "rank", cfg)
    print(text)
    return 0


def _run_simulate(cfg: dict) -> int:
    sim = scenario_config(
        cfg["scenario"],
        int(cfg["case"]),
        _positive_int("--n", cfg["n"]),
        _positive_int("--t", cfg["t"]),
        seed=int(cfg["seed"]),
        r=_positive_int("--r", cfg["r"]),
        theta=float(cfg["theta"]),
    )
    truth = gen_scenario(sim)
    out = cfg["out"]
    save_ground_truth(truth, sim, out)
    _write_run_echo(out, "simulate", cfg)
    print(f"simulate: wrote {sim.n}x{sim.t} panel to {out}")
    return 0


def _run_mc(cfg: dict) -> int:
    methods = [m.strip() for m in str(cfg["methods"]).split(",") if m.strip()]
    sim = scenario_config(
        cfg["scenario"],
        int(cfg["case"]),
        _positive_int("--n", cfg["n"]),
        _positive_int("--t", cfg["t"]),
        seed=int(cfg["seed"]),
        r=_positive_int("--r", cfg["r"]),
        theta=float(cfg["theta"]),
    )
    report = run_monte_carlo(
        sim,
        methods,
        M=_positive_int("--reps", cfg["reps"]),
        master_seed=int(cfg["seed"]),
        k=_positive_int("--k", cfg["k"]),
        P=cfg["P"],
        threads=_resolve_threads(cfg["threads"]),
    )
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "mc_report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    with open(os.path.join(out, "mc_report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    if cfg["figures"]:
        save_mc_figure(report, os.path.join(out, "mc_report.png"))
    _write_run_echo(out, "mc", cfg)
    print(report.to_csv(), end="")
    return 0


def _run_backtest(cfg: dict) -> int:
    panel = Panel.read_csv(cfg["input"])
    bt_cfg = BacktestConfig(
        method=cfg["method"],
        r=_positive_int("--r", cfg["r"]),
        window=_positive_int("--window", cfg["window"]),
        threshold_const=float(cfg["thresh_const"]),
    )
    report = rolling_backtest(panel, bt_cfg, threads=_resolve_threads(cfg["threads"]))
    out = cfg["out"]
    report.save(out, series_ids=panel.series_ids, write_weights=bool(cfg["weights"]))
    if cfg["figures"]:
        save_backtest_figure(report, os.path.join(out, "backtest_report.png"))
    _write_run_echo(out, "backtest", cfg)
    sharpe = "undefined" if report.sharpe is None else f"{report.sharpe:.4f}"
    print(
        f"backtest: {report.oos_returns.size} months, "
        f"mean {report.mean_return:.4f}, sharpe {sharpe}"
    )
    return 0


_DISPATCH = {
    "fit": _run_fit,
    "rank": _run_rank,
    "simulate": _run_simulate,
    "mc": _run_mc,
    "backtest": _run_backtest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = _resolve(args)
        return _DISPATCH[args.cmd](cfg)
    except (ParameterError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DegeneracyError, DefinitenessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except FactorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
