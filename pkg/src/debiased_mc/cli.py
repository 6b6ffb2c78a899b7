"""Experiment runner.

Subcommands ``toy``, ``quad``, ``root``, ``heston`` run debiased estimates
of the respective limits; ``design`` tabulates truncation-law design tools
over a grid of convergence ratios. Reports are written as CSV or JSON with
a summary figure rendered alongside (suppress with ``--no-plot``).

Configuration precedence: command line > ``--config`` file > built-in
defaults. The config file is flat ``key = value`` text with ``#`` comments;
keys are the long flag names (hyphens and underscores interchangeable).

Exit codes: 0 success, 2 configuration error, 3 infeasible design,
4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import design as designmod
from . import plots, report
from .errors import (
    DebiasError,
    GuardExhaustedError,
    InfeasibleBudgetError,
    InfeasibleDesignError,
    InvalidLevelError,
    UnsupportedQueryError,
)
from .estimator import replicate_arrays, summarize_replicates
from .heston import HESTON_PRESETS, HestonParams, heston_level_model
from .laws import AdaptiveLaw, ShiftedGeometricLaw
from .registry import INTEGRANDS, ROOT_PROBLEMS
from .sequences import NewtonModel, QuadratureModel, ToyGeometricModel

EXPERIMENTS = ("toy", "quad", "root", "heston", "design")

_COMMON_DEFAULTS = {
    "reps": 100_000,
    "seed": 0,
    "threads": 1,
    "format": "csv",
    "adaptive": False,
    "epsilon": 1e-3,
    "n_max": 10**6,
    "no_plot": False,
    "out": None,
}

_EXPERIMENT_DEFAULTS = {
    "toy": {"p": 0.5, "shift": 0, "a": 1.0, "b": 1.0, "r": 0.5},
    "quad": {"p": 0.75, "shift": 2, "integrand": "sin_pi_x", "rule": "simpson",
             "lo": None, "hi": None},
    "root": {"p": 0.75, "shift": 4, "problem": "cubic_root",
             "x0_lo": None, "x0_hi": None},
    "heston": {"p": 0.75, "shift": 4, "preset": "broadie_kaya_1",
               "s0": None, "strike": None, "rate": None, "maturity": None,
               "rho": None, "kappa": None, "theta": None, "sigma_v": None,
               "v0": None},
    "design": {"r_min": 0.1, "r_max": 0.9, "r_steps": 17,
               "mean_level": 10.0, "cost_budget": None},
}

_FIELD_TYPES = {
    "reps": int, "seed": int, "threads": int, "shift": int, "n_max": int,
    "r_steps": int,
    "p": float, "epsilon": float, "a": float, "b": float, "r": float,
    "lo": float, "hi": float, "x0_lo": float, "x0_hi": float,
    "s0": float, "strike": float, "rate": float, "maturity": float,
    "rho": float, "kappa": float, "theta": float, "sigma_v": float,
    "v0": float, "r_min": float, "r_max": float, "mean_level": float,
    "cost_budget": float,
    "adaptive": bool, "no_plot": bool,
    "format": str, "integrand": str, "rule": str, "problem": str,
    "preset": str, "out": str, "experiment": str,
}


def _parse_bool(field: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"{field}: expected a boolean, got {raw!r}")


def read_config_file(path: str) -> dict:
    """Parse a flat ``key = value`` config file into typed values."""
    values = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        field = key.strip().replace("-", "_")
        raw = raw.strip()
        if field not in _FIELD_TYPES:
            raise ValueError(f"{field}: unknown config key")
        kind = _FIELD_TYPES[field]
        if kind is bool:
            values[field] = _parse_bool(field, raw)
        else:
            try:
                values[field] = kind(raw)
            except ValueError as exc:
                raise ValueError(f"{field}: {exc}") from exc
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debias",
        description="Unbiased estimation of sequence limits via randomized truncation.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)

    def add_common(p: argparse.ArgumentParser):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--reps", type=int, help="replicate count M")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--p", type=float, help="law parameter (stop probability; adaptive: decay factor)")
        p.add_argument("--shift", type=int, help="guaranteed minimum level")
        p.add_argument("--adaptive", action=argparse.BooleanOptionalAction,
                       help="use the adaptive (stopping-time) truncation rule")
        p.add_argument("--epsilon", type=float, help="adaptive increment threshold")
        p.add_argument("--n-max", type=int, dest="n_max", help="adaptive hard level guard")
        p.add_argument("--threads", type=int, help="worker pool size")
        p.add_argument("--out", help="report output path")
        p.add_argument("--format", choices=("csv", "json"), help="report format")
        p.add_argument("--no-plot", action="store_true", default=None,
                       dest="no_plot", help="skip figure rendering")

    p_toy = sub.add_parser("toy", help="geometric benchmark sequence b + a r**n")
    add_common(p_toy)
    p_toy.add_argument("--a", type=float, help="amplitude")
    p_toy.add_argument("--b", type=float, help="limit")
    p_toy.add_argument("--r", type=float, help="ratio, |r| < 1")

    p_quad = sub.add_parser("quad", help="debiased quadrature on nested dyadic grids")
    add_common(p_quad)
    p_quad.add_argument("--integrand", choices=sorted(INTEGRANDS), help="named integrand")
    p_quad.add_argument("--rule", choices=("trapezoid", "simpson"), help="composite rule")
    p_quad.add_argument("--lo", type=float, help="lower integration bound")
    p_quad.add_argument("--hi", type=float, help="upper integration bound")

    p_root = sub.add_parser("root", help="debiased damped Newton root finding")
    add_common(p_root)
    p_root.add_argument("--problem", choices=sorted(ROOT_PROBLEMS), help="named root problem")
    p_root.add_argument("--x0-lo", type=float, dest="x0_lo", help="start distribution lower bound")
    p_root.add_argument("--x0-hi", type=float, dest="x0_hi", help="start distribution upper bound")

    p_heston = sub.add_parser("heston", help="debiased stochastic-volatility call pricing")
    add_common(p_heston)
    p_heston.add_argument("--preset", choices=sorted(HESTON_PRESETS), help="named parameter set")
    for flag, dest in (
        ("--s0", "s0"), ("--strike", "strike"), ("--rate", "rate"),
        ("--maturity", "maturity"), ("--rho", "rho"), ("--kappa", "kappa"),
        ("--theta", "theta"), ("--sigma-v", "sigma_v"), ("--v0", "v0"),
    ):
        p_heston.add_argument(flag, type=float, dest=dest, help=f"override {dest}")

    p_design = sub.add_parser("design", help="truncation-law design tables")
    add_common(p_design)
    p_design.add_argument("--r-min", type=float, dest="r_min", help="smallest convergence ratio")
    p_design.add_argument("--r-max", type=float, dest="r_max", help="largest convergence ratio")
    p_design.add_argument("--r-steps", type=int, dest="r_steps", help="grid size")
    p_design.add_argument("--mean-level", type=float, dest="mean_level",
                          help="expected-level budget for the geometric design")
    p_design.add_argument("--cost-budget", type=float, dest="cost_budget",
                          help="expected-evaluation budget for exponential-cost design")

    return parser


def merge_config(args: argparse.Namespace) -> dict:
    """Apply precedence: CLI > config file > defaults."""
    experiment = args.experiment
    cfg = dict(_COMMON_DEFAULTS)
    cfg.update(_EXPERIMENT_DEFAULTS[experiment])
    file_values = {}
    if getattr(args, "config", None):
        file_values = read_config_file(args.config)
        if "experiment" in file_values and file_values.pop("experiment") != experiment:
            raise ValueError("experiment: config file experiment differs from subcommand")
    for field, value in file_values.items():
        if field not in cfg:
            raise ValueError(f"{field}: not a valid key for experiment {experiment!r}")
        cfg[field] = value
    for field in cfg:
        cli_value = getattr(args, field, None)
        if cli_value is not None:
            cfg[field] = cli_value
    cfg["experiment"] = experiment
    return cfg


def _build_law(cfg: dict):
    if cfg["adaptive"]:
        return AdaptiveLaw(p=cfg["p"], epsilon=cfg["epsilon"], n_max=cfg["n_max"],
                           shift=cfg["shift"])
    return ShiftedGeometricLaw(p=cfg["p"], shift=cfg["shift"])


def _build_model(cfg: dict):
    experiment = cfg["experiment"]
    if experiment == "toy":
        return ToyGeometricModel(b=cfg["b"], a=cfg["a"], r=cfg["r"]), {
            "a": cfg["a"], "b": cfg["b"], "r": cfg["r"]}
    if experiment == "quad":
        name = cfg["integrand"]
        if name not in INTEGRANDS:
            raise KeyError(f"integrand: unknown name {name!r}")
        spec = INTEGRANDS[name]
        lo = cfg["lo"] if cfg["lo"] is not None else spec.lo
        hi = cfg["hi"] if cfg["hi"] is not None else spec.hi
        model = QuadratureModel(spec.f, lo, hi, rule=cfg["rule"])
        return model, {"integrand": name, "rule": cfg["rule"], "lo": lo, "hi": hi}
    if experiment == "root":
        name = cfg["problem"]
        if name not in ROOT_PROBLEMS:
            raise KeyError(f"problem: unknown name {name!r}")
        spec = ROOT_PROBLEMS[name]
        lo = cfg["x0_lo"] if cfg["x0_lo"] is not None else spec.start_low
        hi = cfg["x0_hi"] if cfg["x0_hi"] is not None else spec.start_high
        model = NewtonModel(spec.h, spec.h_prime, spec.target, lo, hi)
        return model, {"problem": name, "x0_lo": lo, "x0_hi": hi}
    if experiment == "heston":
        name = cfg["preset"]
        if name not in HESTON_PRESETS:
            raise KeyError(f"preset: unknown name {name!r}")
        base = HESTON_PRESETS[name]
        overrides = {f: cfg[f] for f in
                     ("s0", "strike", "rate", "maturity", "rho", "kappa",
                      "theta", "sigma_v", "v0")
                     if cfg[f] is not None}
        params = HestonParams(**{**base.__dict__, **overrides}) if overrides else base
        return heston_level_model(params), {"preset": name, **params.__dict__}
    raise ValueError(f"experiment: unknown experiment {experiment!r}")


def _figure_path(out: str):
    path = Path(out)
    return path.with_suffix(".png") if path.suffix else path.with_name(path.name + ".png")


def _write_output(out: str, text: str) -> None:
    Path(out).write_text(text)


def _run_estimate_command(cfg: dict) -> int:
    if cfg["reps"] < 2:
        raise ValueError(f"reps: must be >= 2, got {cfg['reps']}")
    law = _build_law(cfg)
    model, model_desc = _build_model(cfg)
    start = time.perf_counter()
    ys, levels, costs, sig2, n_failed = replicate_arrays(
        model, law, cfg["reps"], cfg["seed"], threads=cfg["threads"]
    )
    rep = summarize_replicates(ys, levels, costs, sig2, n_failed, seed=cfg["seed"],
                               adaptive=cfg["adaptive"])
    wall = time.perf_counter() - start

    experiment = cfg["experiment"]
    law_desc = {"type": "adaptive" if cfg["adaptive"] else "shifted_geometric",
                "p": cfg["p"], "shift": cfg["shift"]}
    if cfg["adaptive"]:
        law_desc.update(epsilon=cfg["epsilon"], n_max=cfg["n_max"])

    if cfg["out"]:
        if cfg["format"] == "json":
            text = report.estimate_json(experiment, rep,
                                        extra={"law": law_desc, "model": model_desc},
                                        wall_time_s=wall)
        else:
            text = report.estimate_csv(experiment, rep)
        _write_output(cfg["out"], text)
        if not cfg["no_plot"]:
            plots.save_estimate_figure(_figure_path(cfg["out"]), experiment, ys, levels, rep)

    sig2_text = "n/a" if math.isnan(rep.sigma2_hat_mean) else f"{rep.sigma2_hat_mean:.6g}"
    print(f"experiment      {experiment}")
    print(f"replicates      {rep.m}" + (f" (+{rep.n_failed} failed)" if rep.n_failed else ""))
    print(f"mean            {rep.mean:.8g}")
    print(f"stderr          {rep.stderr:.4g}")
    print(f"var(y)          {rep.var_y:.6g}")
    print(f"sigma2_hat mean {sig2_text}")
    print(f"mean level      {rep.mean_level:.4g}")
    print(f"mean cost       {rep.mean_cost:.6g}")
    print(f"wall time       {wall:.2f} s")
    if cfg["out"]:
        print(f"report          {cfg['out']}")
        if not cfg["no_plot"]:
            print(f"figure          {_figure_path(cfg['out'])}")
    return 0


def _design_rows(cfg: dict) -> tuple[list[str], list[dict]]:
    if cfg["r_steps"] < 1:
        raise ValueError(f"r_steps: must be >= 1, got {cfg['r_steps']}")
    if not (0.0 < cfg["r_min"] <= cfg["r_max"] < 1.0):
        raise ValueError(
            f"r_min/r_max: need 0 < r_min <= r_max < 1, got {cfg['r_min']}, {cfg['r_max']}"
        )
    grid = np.linspace(cfg["r_min"], cfg["r_max"], cfg["r_steps"])
    columns = ["r", "inflation", "q", "s", "s_real", "min_variance"]
    if cfg["cost_budget"] is not None:
        columns += ["cost_s", "cost_q", "cost_objective"]
    rows = []
    for r in grid:
        r = float(r)
        row = {"r": r, "inflation": designmod.mse_inflation_factor(r)}
        try:
            d = designmod.optimal_geometric_design(r, cfg["mean_level"])
            row.update(q=d.q, s=d.s, s_real=d.s_real, min_variance=d.min_variance)
        except InfeasibleBudgetError:
            row.update(q=math.nan, s=-1, s_real=math.nan, min_variance=math.nan)
        if cfg["cost_budget"] is not None:
            try:
                c = designmod.cost_constrained_design(r, cfg["cost_budget"])
                row.update(cost_s=c.s, cost_q=c.q, cost_objective=c.objective)
            except InfeasibleBudgetError:
                row.update(cost_s=-1, cost_q=math.nan, cost_objective=math.nan)
        rows.append(row)
    return columns, rows


def _run_design_command(cfg: dict) -> int:
    start = time.perf_counter()
    columns, rows = _design_rows(cfg)
    wall = time.perf_counter() - start
    if cfg["out"]:
        if cfg["format"] == "json":
            text = report.table_json(columns, rows, wall_time_s=wall)
        else:
            text = report.table_csv(columns, rows)
        _write_output(cfg["out"], text)
        if not cfg["no_plot"]:
            plots.save_design_figure(_figure_path(cfg["out"]), rows)
        print(f"wrote {len(rows)} design rows to {cfg['out']}")
        if not cfg["no_plot"]:
            print(f"figure          {_figure_path(cfg['out'])}")
    else:
        sys.stdout.write(report.table_csv(columns, rows))
    return 0


def _main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = merge_config(args)
    if cfg["experiment"] == "design":
        return _run_design_command(cfg)
    return _run_estimate_command(cfg)


def main(argv=None) -> int:
    try:
        return _main(argv)
    except InfeasibleDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError, TypeError, InvalidLevelError,
            UnsupportedQueryError, GuardExhaustedError) as exc:
        message = exc.args[0] if exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
