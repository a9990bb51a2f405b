"""Experiment drivers and the command-line entry point.

Commands cover the toy Gaussian annealing studies (anneal-toy, ais, bdmc,
heuristic-q, grid-q) and marginal likelihood estimation for logistic
regression datasets (smc).  Exit codes: 0 success, 2 invalid configuration,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from qanneal.densities import (
    gaussian,
    logistic_posterior,
    logistic_prior,
    with_log_scale,
)
from qanneal.hmc import HmcConfig
from qanneal.io import (
    COMMANDS,
    PATH_KINDS,
    SCHEDULE_RULES,
    ConfigError,
    RunConfig,
    RunReport,
    load_binary_regression_csv,
    write_report_json,
    write_trace_csv,
)
from qanneal.paths import MomentPath, QPath
from qanneal.samplers import ais_forward, ais_reverse, bdmc_gap, smc_run
from qanneal.schedules import HeuristicConfig, ess_heuristic_q, linear_schedule, q_grid

_TOY_DEFAULTS = {
    "mu0": -4.0,
    "var0": 3.0,
    "mu1": 4.0,
    "var1": 1.0,
    "target_log_scale": 0.0,
}
_STEP_SIZE = 0.5
_LEAPFROG = 5
_DEFAULT_ADAPT_STEPS = 10
_GROUND_TRUTH_PARTICLES = 50_000
_GROUND_TRUTH_MOVES = 20

_SMC_COMMANDS = ("anneal-toy", "smc")
_AIS_COMMANDS = ("ais", "bdmc", "grid-q")


def _validate(config: RunConfig) -> list[str]:
    errors = []
    if config.command not in COMMANDS:
        errors.append(f"command: unknown command {config.command!r}")
    if config.path_kind not in PATH_KINDS:
        errors.append(f"path_kind: unknown kind {config.path_kind!r}")
    if config.schedule not in SCHEDULE_RULES:
        errors.append(f"schedule: unknown rule {config.schedule!r}")

    if config.command == "grid-q":
        if config.path_kind != "qpath":
            errors.append("path_kind: grid-q sweeps qpath orders; set path_kind to qpath")
        if config.q is not None:
            errors.append("q: grid-q chooses q itself; leave it unset")
    elif config.path_kind == "qpath":
        if config.q is None:
            errors.append("q: required when path_kind is qpath")
        elif not math.isfinite(config.q):
            errors.append("q: must be finite")
    elif config.q is not None:
        errors.append("q: only meaningful when path_kind is qpath")

    min_particles = 2 if config.command in _SMC_COMMANDS else 1
    if config.particles < min_particles:
        errors.append(f"particles: need at least {min_particles}")
    if config.K < 1:
        errors.append("K: need at least one step")
    if config.moves < 0:
        errors.append("moves: must be nonnegative")
    if config.schedule == "adaptive" and config.command in _AIS_COMMANDS:
        errors.append("schedule: AIS-style commands need a fixed schedule; use linear")

    if config.command == "smc":
        if config.dataset is None:
            errors.append("dataset: required for smc")
        elif not os.path.exists(config.dataset):
            errors.append(f"dataset: file not found: {config.dataset}")
        if config.path_kind in ("moment", "escort"):
            errors.append(
                "path_kind: moment and escort need closed-form endpoint moments; "
                "smc supports geometric and qpath"
            )
    elif config.dataset is not None:
        errors.append("dataset: only the smc command reads a dataset")

    if config.path_kind == "escort":
        nu = config.extras.get("nu")
        if nu is None or not nu > 0.0:
            errors.append("nu: escort path needs a positive nu")
    elif config.extras.get("nu") is not None:
        errors.append("nu: only the escort path takes nu")

    for key in ("var0", "var1"):
        value = config.extras.get(key)
        if value is not None and not value > 0.0:
            errors.append(f"{key}: must be positive")

    restarts = config.extras.get("restarts")
    if restarts is not None and restarts < 1:
        errors.append("restarts: need at least one restart")
    fraction = config.extras.get("ess_target_fraction")
    if fraction is not None and not 0.0 < fraction <= 1.0:
        errors.append("ess_target_fraction: must lie in (0, 1]")
    sd = config.extras.get("log10_sd")
    if sd is not None and not sd > 0.0:
        errors.append("log10_sd: must be positive")
    count = config.extras.get("grid_count")
    if count is not None and count < 1:
        errors.append("grid_count: need at least one grid point")
    adapt = config.extras.get("adapt_steps")
    if adapt is not None and adapt < 0:
        errors.append("adapt_steps: must be nonnegative")
    return errors


def _toy_params(extras: dict) -> dict:
    params = dict(_TOY_DEFAULTS)
    for key in params:
        if key in extras:
            params[key] = float(extras[key])
    return params


def _toy_endpoints(extras: dict):
    p = _toy_params(extras)
    base = gaussian([p["mu0"]], [[p["var0"]]])
    target = with_log_scale(gaussian([p["mu1"]], [[p["var1"]]]), p["target_log_scale"])
    return base, target, p


def _toy_path(config: RunConfig):
    p = _toy_params(config.extras)
    if config.path_kind in ("geometric", "qpath"):
        base, target, _ = _toy_endpoints(config.extras)
        q = 1.0 if config.path_kind == "geometric" else config.q
        return QPath(base=base, target=target, q=q)
    nu = float(config.extras["nu"]) if config.path_kind == "escort" else None
    return MomentPath(
        [p["mu0"]], [[p["var0"]]], [p["mu1"]], [[p["var1"]]],
        nu=nu, log_scale1=p["target_log_scale"],
    )


def _dataset_path(config: RunConfig):
    model = load_binary_regression_csv(config.dataset)
    q = 1.0 if config.path_kind == "geometric" else config.q
    return QPath(base=logistic_prior(model), target=logistic_posterior(model), q=q)


def _hmc_config(dim: int) -> HmcConfig:
    return HmcConfig(step_size=_STEP_SIZE, n_leapfrog=_LEAPFROG, mass=np.ones(dim))


def _adapt_steps(config: RunConfig) -> int:
    return int(config.extras.get("adapt_steps", _DEFAULT_ADAPT_STEPS))


def _effective_budget(config: RunConfig) -> tuple[int, int]:
    if config.extras.get("ground_truth"):
        return (
            max(config.particles, _GROUND_TRUTH_PARTICLES),
            max(config.moves, _GROUND_TRUTH_MOVES),
        )
    return config.particles, config.moves


def _is_stderr(final_ess: float, n: int) -> float:
    return math.sqrt(max(n / final_ess - 1.0, 0.0) / n)


def _smc_stderr(ess_trace, n: int) -> float:
    total = sum(max(n / e - 1.0, 0.0) for e in ess_trace if e > 0.0)
    return math.sqrt(total / n)


def _drive_smc(config: RunConfig, path) -> dict:
    particles, moves = _effective_budget(config)
    schedule = "adaptive" if config.schedule == "adaptive" else linear_schedule(config.K)
    adapt = _adapt_steps(config)
    log_z, diag = smc_run(
        path,
        schedule,
        particles=particles,
        moves_per_step=moves,
        cfg=_hmc_config(path.base.dim),
        rng=int(config.seed),
        adapt_steps=adapt,
    )
    ess = tuple(float(x) for x in diag.ess_trace)
    return {
        "log_Z": float(log_z),
        "stderr_estimate": _smc_stderr(ess, particles),
        "ess_trace": ess,
        "beta_trace": tuple(float(x) for x in diag.beta_trace[1:]),
        "acceptance_trace": tuple(float(x) for x in diag.acceptance_trace),
        "extras": {"resample_count": diag.resample_count},
    }


def _ais_traces(result) -> dict:
    return {
        "ess_trace": tuple(float(x) for x in result.ess_trace),
        "beta_trace": tuple(float(x) for x in result.schedule_used[1:]),
        "acceptance_trace": tuple(float(x) for x in result.acceptance_trace),
    }


def _drive_ais(config: RunConfig, path) -> dict:
    chains, moves = _effective_budget(config)
    rng = np.random.default_rng(config.seed)
    result = ais_forward(
        path, linear_schedule(config.K), chains, _hmc_config(path.base.dim), moves, rng,
        adapt_steps=_adapt_steps(config),
    )
    return {
        "log_Z": result.log_Z_estimate,
        "stderr_estimate": _is_stderr(result.ess_trace[-1], chains),
        "extras": {"n_dropped": result.n_dropped},
        **_ais_traces(result),
    }


def _drive_bdmc(config: RunConfig, path) -> dict:
    chains, moves = _effective_budget(config)
    rng = np.random.default_rng(config.seed)
    cfg = _hmc_config(path.base.dim)
    schedule = linear_schedule(config.K)
    adapt = _adapt_steps(config)
    fwd = ais_forward(path, schedule, chains, cfg, moves, rng, adapt_steps=adapt)
    target_draws = path.target.exact_sampler(rng, chains)
    rev = ais_reverse(path, schedule, target_draws, cfg, moves, rng, adapt_steps=adapt)
    return {
        "log_Z": fwd.log_Z_estimate,
        "stderr_estimate": _is_stderr(fwd.ess_trace[-1], chains),
        "extras": {
            "upper_bound": float(-rev.log_Z_estimate),
            "bdmc_gap": bdmc_gap(fwd, rev),
            "n_dropped_forward": fwd.n_dropped,
            "n_dropped_reverse": rev.n_dropped,
        },
        **_ais_traces(fwd),
    }


def _drive_heuristic(config: RunConfig) -> dict:
    base, target, _ = _toy_endpoints(config.extras)
    rng = np.random.default_rng(config.seed)
    draws = base.exact_sampler(rng, config.particles)
    ratios = np.atleast_1d(target.log_density(draws)) - np.atleast_1d(base.log_density(draws))
    heuristic_cfg = HeuristicConfig(
        restarts=int(config.extras.get("restarts", 100)),
        log10_sd=float(config.extras.get("log10_sd", 0.1)),
        ess_target_fraction=float(config.extras.get("ess_target_fraction", 0.5)),
    )
    out = ess_heuristic_q(ratios, heuristic_cfg, rng)
    return {
        "log_Z": math.nan,
        "stderr_estimate": math.nan,
        "ess_trace": (),
        "beta_trace": (),
        "acceptance_trace": (),
        "extras": {
            "q": float(out.q),
            "beta1": float(out.beta1),
            "loss": float(out.loss),
            "feasible": bool(out.feasible),
        },
    }


def _drive_grid(config: RunConfig) -> tuple[dict, list[tuple[str, RunReport]]]:
    qs = q_grid(int(config.extras.get("grid_count", 20)))
    sub_reports = []
    for q in qs:
        # Same seed for every q: common random numbers sharpen the comparison.
        sub = replace(config, command="bdmc", path_kind="qpath", q=float(q), output=None)
        sub_reports.append(_execute(sub)[0])
    gaps = [r.extras["bdmc_gap"] for r in sub_reports]
    best = int(np.argmin(gaps))
    width = max(2, len(str(len(qs) - 1)))
    attachments = [(f".q{i:0{width}d}", r) for i, r in enumerate(sub_reports)]
    chosen = sub_reports[best]
    body = {
        "log_Z": chosen.log_Z,
        "stderr_estimate": chosen.stderr_estimate,
        "ess_trace": chosen.ess_trace,
        "beta_trace": chosen.beta_trace,
        "acceptance_trace": chosen.acceptance_trace,
        "extras": {
            "qs": [float(q) for q in qs],
            "bdmc_gaps": [float(g) for g in gaps],
            "best_q": float(qs[best]),
            "best_gap": float(gaps[best]),
        },
    }
    return body, attachments


def _execute(config: RunConfig) -> tuple[RunReport, list[tuple[str, RunReport]]]:
    start = time.perf_counter()
    attachments: list[tuple[str, RunReport]] = []
    if config.command == "grid-q":
        body, attachments = _drive_grid(config)
    elif config.command == "heuristic-q":
        body = _drive_heuristic(config)
    elif config.command == "smc":
        body = _drive_smc(config, _dataset_path(config))
    elif config.command == "anneal-toy":
        body = _drive_smc(config, _toy_path(config))
    elif config.command == "ais":
        body = _drive_ais(config, _toy_path(config))
    elif config.command == "bdmc":
        body = _drive_bdmc(config, _toy_path(config))
    else:
        raise ConfigError([f"command: unknown command {config.command!r}"])
    if config.command != "smc" and config.command != "grid-q":
        body.setdefault("extras", {})
        body["extras"]["true_log_Z"] = _toy_params(config.extras)["target_log_scale"]
    report = RunReport(
        log_Z=body["log_Z"],
        stderr_estimate=body["stderr_estimate"],
        ess_trace=body["ess_trace"],
        beta_trace=body["beta_trace"],
        acceptance_trace=body["acceptance_trace"],
        wallclock_s=time.perf_counter() - start,
        config_echo=config,
        extras=body["extras"],
    )
    return report, attachments


def _summary_line(report: RunReport) -> str:
    command = report.config_echo.command
    extras = report.extras
    if command == "heuristic-q":
        return (
            f"heuristic-q: q={extras['q']:.6g} beta1={extras['beta1']:.6g} "
            f"loss={extras['loss']:.6g} feasible={extras['feasible']}"
        )
    if command == "grid-q":
        return (
            f"grid-q: best_q={extras['best_q']:.10g} best_gap={extras['best_gap']:.6g} "
            f"log_Z={report.log_Z:.6g}"
        )
    if command == "bdmc":
        return (
            f"bdmc: log_Z={report.log_Z:.6g} upper={extras['upper_bound']:.6g} "
            f"gap={extras['bdmc_gap']:.6g} wallclock_s={report.wallclock_s:.3f}"
        )
    return (
        f"{command}: log_Z={report.log_Z:.6g} stderr={report.stderr_estimate:.6g} "
        f"steps={len(report.beta_trace)} wallclock_s={report.wallclock_s:.3f}"
    )


def run(config: RunConfig) -> RunReport:
    """Validate, execute, write the JSON report, and print a summary line."""
    errors = _validate(config)
    if errors:
        raise ConfigError(errors)
    report, attachments = _execute(config)
    if config.output is not None:
        out = Path(config.output)
        for suffix, sub in attachments:
            write_report_json(sub, out.with_name(out.stem + suffix + out.suffix))
        write_report_json(report, out)
    trace_csv = config.extras.get("trace_csv")
    if trace_csv is not None:
        write_trace_csv(report, trace_csv)
    print(_summary_line(report))
    return report


def _add_common_flags(sub, particles_default=64):
    sub.add_argument("--path-kind", choices=PATH_KINDS, default="geometric")
    sub.add_argument("--q", type=float, default=None)
    sub.add_argument(
        "--particles", "--chains", dest="particles", type=int, default=particles_default
    )
    sub.add_argument("--k", dest="k", type=int, default=16)
    sub.add_argument("--schedule", choices=SCHEDULE_RULES, default="linear")
    sub.add_argument("--moves", type=int, default=1)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--output", default=None)
    sub.add_argument("--trace-csv", dest="trace_csv", default=None)
    sub.add_argument("--adapt-steps", dest="adapt_steps", type=int, default=None)
    sub.add_argument("--ground-truth", dest="ground_truth", action="store_true")


def _add_toy_flags(sub):
    sub.add_argument("--mu0", type=float, default=None)
    sub.add_argument("--var0", type=float, default=None)
    sub.add_argument("--mu1", type=float, default=None)
    sub.add_argument("--var1", type=float, default=None)
    sub.add_argument("--target-log-scale", dest="target_log_scale", type=float, default=None)
    sub.add_argument("--nu", type=float, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qanneal",
        description="Annealed estimators of log normalizing constants over power-mean paths.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    toy = commands.add_parser("anneal-toy", help="SMC on a two-Gaussian toy problem")
    _add_common_flags(toy)
    _add_toy_flags(toy)

    smc = commands.add_parser("smc", help="SMC marginal likelihood for a logistic dataset")
    _add_common_flags(smc, particles_default=256)
    smc.add_argument("--dataset", default=None)

    ais = commands.add_parser("ais", help="forward AIS on the toy problem")
    _add_common_flags(ais)
    _add_toy_flags(ais)

    bdmc = commands.add_parser("bdmc", help="forward plus reverse AIS sandwich on the toy")
    _add_common_flags(bdmc)
    _add_toy_flags(bdmc)

    heuristic = commands.add_parser("heuristic-q", help="ESS-matching choice of q")
    _add_common_flags(heuristic, particles_default=256)
    _add_toy_flags(heuristic)
    heuristic.add_argument("--restarts", type=int, default=None)
    heuristic.add_argument("--log10-sd", dest="log10_sd", type=float, default=None)
    heuristic.add_argument(
        "--ess-target-fraction", dest="ess_target_fraction", type=float, default=None
    )

    grid = commands.add_parser("grid-q", help="BDMC gap sweep over a grid of orders")
    _add_common_flags(grid)
    _add_toy_flags(grid)
    grid.add_argument("--grid-count", dest="grid_count", type=int, default=None)
    grid.set_defaults(path_kind="qpath")
    return parser


_EXTRA_KEYS = (
    "mu0",
    "var0",
    "mu1",
    "var1",
    "target_log_scale",
    "nu",
    "restarts",
    "log10_sd",
    "ess_target_fraction",
    "grid_count",
    "adapt_steps",
    "trace_csv",
)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    extras = {}
    for key in _EXTRA_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            extras[key] = value
    if getattr(args, "ground_truth", False):
        extras["ground_truth"] = True
    return RunConfig(
        command=args.command,
        path_kind=args.path_kind,
        q=args.q,
        particles=args.particles,
        K=args.k,
        schedule=args.schedule,
        moves=args.moves,
        seed=args.seed,
        dataset=getattr(args, "dataset", None),
        output=args.output,
        extras=extras,
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    config = _config_from_args(args)
    try:
        run(config)
    except ConfigError as err:
        for message in err.errors:
            print(f"config error: {message}", file=sys.stderr)
        return 2
    except Exception as err:  # CLI boundary: anything else is a runtime failure
        print(f"runtime failure: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
