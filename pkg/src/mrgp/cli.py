"""Command-line entry point.

Every experiment setting is a config key; set it in a ``--config`` file or
override it with ``--key=value``. Run ``mrgp <command> --help`` for the keys
and their defaults.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import ar1_forecast, fit_ar1_mle
from .config import FIELDS, ConfigError, ExperimentConfig, parse_config, serialize_config, set_value
from .gp import optimize_hyperparams, predict
from .harness import PRESETS, _regime_fn, expected_sharpe_select, run_sweep, trial_seed
from .io import (
    CSVFormatError,
    load_series_csv,
    read_forecast_csv,
    write_forecast_csv,
    write_paths_csv,
    write_report_csv,
    write_series_csv,
)
from .kernels import KernelFamily, KernelSpec
from .representations import (
    RepresentationKind,
    build_augmented_rows,
    build_functional,
    build_one_dim,
    forecast_query_rows,
    subsample_rows,
    to_training_set,
)
from .simulation import regime_onehot, simulate_series, simulate_test_paths

log = logging.getLogger("mrgp")


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="flat 'key = value' config file")
    g.add_argument("--seed", type=int, help="master seed (same as --seed=...)")
    g.add_argument("--jobs", type=int, help="worker processes; 0 uses every core")
    g.add_argument("-v", "--verbose", action="store_true")
    keys = p.add_argument_group("config keys (override the file)")
    for name, f in FIELDS.items():
        if name in ("seed", "jobs"):
            continue
        d = f.default
        if isinstance(d, tuple):
            d = ",".join(map(str, d))
        opts = [f"--{name}"]
        if "_" in name:
            opts.append(f"--{name.replace('_', '-')}")
        keys.add_argument(*opts, dest=f"key_{name}", metavar="V",
                          help=f"{f.metadata['help']} [default: {'' if d is None else d}]")
    return p


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    for name in FIELDS:
        raw = getattr(args, f"key_{name}", None)
        if raw is not None:
            cfg = set_value(cfg, name, raw, f"--{name}: ")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.jobs is not None:
        cfg = replace(cfg, jobs=args.jobs)
    if getattr(args, "preset", None):
        cfg = replace(cfg, preset=args.preset)
    return cfg.validate()


def _out_dir(cfg: ExperimentConfig) -> Path:
    d = cfg.effective_output_dir()
    d.mkdir(parents=True, exist_ok=True)
    return d


def _jobs(cfg: ExperimentConfig) -> int:
    return cfg.jobs or os.cpu_count() or 1


def _simulated(cfg: ExperimentConfig, trial_index: int = 0):
    tc = cfg.trial_config()
    seed = trial_seed(tc.master_seed, 0, trial_index)
    sim = tc.sim.with_seed(seed)
    n_days = (sim.n_years - 1) * sim.days_per_year + tc.offset(trial_index) + 1
    grid, ou_state = simulate_series(sim, n_days)
    return tc, sim, seed, grid, ou_state


# -- commands --------------------------------------------------------------

def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    tc, sim, _, grid, ou_state = _simulated(cfg, args.trial)
    t0 = grid.start + len(grid) - 1
    test = simulate_test_paths(sim, t0, ou_state, tc.n_test_paths, tc.forecast_horizon)
    out = _out_dir(cfg)
    write_series_csv(grid, out / "series.csv")
    write_paths_csv(test.paths, out / "paths.csv")
    print(f"wrote {out / 'series.csv'} ({len(grid)} days, t0={t0}) and "
          f"{out / 'paths.csv'} ({test.n_paths} paths x {test.horizon} days)")
    return 0


def _fit_one(cfg, grid, kind, family, regime, seed, t0, horizon):
    if kind is RepresentationKind.ONE_DIM:
        ts = build_one_dim(grid)
    elif kind is RepresentationKind.FUNCTIONAL:
        ts = build_functional(grid)
    else:
        rows = build_augmented_rows(grid, regime, cfg.max_delta)
        rows = subsample_rows(rows, cfg.subsample_budget, seed, cfg.subsample_policy,
                              grid.days_per_year)
        ts = to_training_set(rows, kind, grid.days_per_year)
    spec = KernelSpec.default(family, categorical=ts.categorical)
    gp = optimize_hyperparams(ts, spec, cfg.restarts, seed,
                              length_scale_upper_bound=cfg.length_scale_upper_bound,
                              maxiter=cfg.maxiter,
                              noise_floor=cfg.augmented_noise_floor if kind.augmented else 1e-12)
    frozen = (grid.value_at(t0), *regime(t0)) if kind.augmented else ()
    q = forecast_query_rows(grid, kind, t0, horizon, frozen, cfg.max_delta)
    return gp, predict(gp, q.X, observation=True, horizons=q.horizons)


def _realized_regime(grid, lookahead):
    last = grid.start + len(grid) - 1
    level = float(np.mean(grid.values))
    return lambda t: regime_onehot(grid.value_at, t, lookahead, level, last_day=last)


def cmd_fit(args, cfg: ExperimentConfig) -> int:
    kind = RepresentationKind.parse(args.representation)
    family = KernelFamily.parse(args.kernel)
    H = cfg.forecast_horizon
    if args.series:
        grid = load_series_csv(args.series, cfg.days_per_year)
        regime = _realized_regime(grid, cfg.regime_lookahead)
        seed, emp_mean, emp_std = cfg.seed, None, None
    else:
        tc, sim, seed, grid, ou_state = _simulated(cfg, args.trial)
        regime = _regime_fn(tc, sim, grid)
        test = simulate_test_paths(sim, grid.start + len(grid) - 1, ou_state, tc.n_test_paths, H)
        emp_mean, emp_std = test.paths.mean(axis=0), test.paths.std(axis=0)
    t0 = grid.start + len(grid) - 1
    out = _out_dir(cfg)
    if args.model == "ar1":
        p = fit_ar1_mle(grid.values)
        fc = ar1_forecast(p, grid.value_at(t0), H)
        summary = f"ar1 phi={p.phi:.6g} c={p.c:.6g} sigma2={p.sigma2:.6g}"
        name = "forecast_ar1.csv"
    else:
        gp, fc = _fit_one(cfg, grid, kind, family, regime, seed, t0, H)
        hp = ", ".join(f"{n}={v:.4g}" for n, v in zip(gp.spec.param_names(), gp.spec.theta))
        summary = f"gp {kind.value}/{family.value} lml={gp.lml:.6g} ({hp})"
        name = f"forecast_{kind.value}_{family.value}.csv"
    path = write_forecast_csv(fc, out / name, emp_mean, emp_std)
    print(summary)
    print(f"wrote {path}")
    return 0


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    tc = cfg.trial_config()
    values = cfg.resolved_values()
    out = _out_dir(cfg)
    progress = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    report = run_sweep(tc, cfg.axis, values, jobs=_jobs(cfg), progress=progress)
    files = write_report_csv(report, out, cfg.preset.replace("-", "_"), cfg.dump_forecasts)
    (out / f"config_{cfg.preset.replace('-', '_')}.txt").write_text(serialize_config(cfg))
    print(f"wrote {files[0]}" + (f" and {len(files) - 1} forecast dumps" if len(files) > 1 else ""))
    return 0


def cmd_sanity(args, cfg: ExperimentConfig) -> int:
    grid = load_series_csv(args.series, cfg.days_per_year)
    family = KernelFamily.parse(args.kernel)
    n_hold = args.holdout
    if not 0 <= n_hold < len(grid) - 1:
        raise ValueError("holdout must leave at least 2 training points")
    train = grid if n_hold == 0 else type(grid)(grid.values[: len(grid) - n_hold],
                                                grid.days_per_year, grid.year_day(grid.start))
    t0 = train.start + len(train) - 1
    H = n_hold or cfg.forecast_horizon
    out = _out_dir(cfg)
    for kind in (RepresentationKind.ONE_DIM, RepresentationKind.FUNCTIONAL):
        gp, fc = _fit_one(cfg, train, kind, family, None, cfg.seed, t0, H)
        actual = grid.values[len(train):] if n_hold else None
        path = write_forecast_csv(fc, out / f"sanity_{kind.value}.csv", actual)
        line = f"{kind.value:12s} lml={gp.lml:.6g}"
        if actual is not None:
            line += f" holdout mse={float(np.mean((fc.mean - actual) ** 2)):.6g}"
        print(f"{line}  -> {path}")
    return 0


def cmd_trade(args, cfg: ExperimentConfig) -> int:
    fc = read_forecast_csv(args.forecast)
    d = expected_sharpe_select(fc, args.price, args.cost)
    for h, s, sign in zip(fc.horizons, d.sharpe, d.direction):
        side = "long" if sign > 0 else "short" if sign < 0 else "flat"
        print(f"h={h:g} sharpe={s:.6g} {side}")
    if d.excluded:
        print(f"excluded (zero std): {', '.join(f'{h:g}' for h in d.excluded)}")
    if d.trade:
        i = int(np.flatnonzero(fc.horizons == d.best_horizon)[0])
        side = "long" if d.direction[i] > 0 else "short"
        print(f"decision: {side} for {d.best_horizon:g} days (sharpe {d.sharpe[i]:.6g})")
    else:
        print("decision: no trade")
    return 0


class _DefaultsFormatter(argparse.ArgumentDefaultsHelpFormatter):
    # config keys default to None so the file can fill them; their real
    # default is already in the help text
    def _get_help_string(self, action):
        if action.default is None:
            return action.help
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    parent = _config_parent()
    fmt = _DefaultsFormatter
    p = argparse.ArgumentParser(prog="mrgp", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[parent], formatter_class=fmt,
                       help="write a simulated training series and its test paths")
    s.add_argument("--trial", type=int, default=0, help="trial index (sets seed and start offset)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", parents=[parent], formatter_class=fmt,
                       help="fit one model and write its forecast")
    s.add_argument("--series", type=Path, help="index,value or date,value CSV (default: simulate)")
    s.add_argument("--model", choices=("gp", "ar1"), default="gp")
    s.add_argument("--representation", default="functional",
                   choices=[k.value for k in RepresentationKind])
    s.add_argument("--kernel", default="rq", choices=[k.value for k in KernelFamily])
    s.add_argument("--trial", type=int, default=0, help="trial index when simulating")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("sweep", parents=[parent], formatter_class=fmt,
                       help="run an experiment preset and write the report CSV")
    s.add_argument("preset", nargs="?", choices=sorted(PRESETS),
                   help="preset (overrides the preset key)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("sanity", parents=[parent], formatter_class=fmt,
                       help="one-dimensional vs functional fit on an ingested series")
    s.add_argument("series", type=Path)
    s.add_argument("--kernel", default="rbf", choices=[k.value for k in KernelFamily])
    s.add_argument("--holdout", type=int, default=0,
                   help="hold out the last N points and score the forecast on them")
    s.set_defaults(func=cmd_sanity)

    s = sub.add_parser("trade", parents=[parent], formatter_class=fmt,
                       help="expected-Sharpe horizon choice for a forecast CSV")
    s.add_argument("forecast", type=Path)
    s.add_argument("--price", type=float, required=True, help="current price")
    s.add_argument("--cost", type=float, default=0.0, help="round-trip cost per unit")
    s.set_defaults(func=cmd_trade)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except (ConfigError, CSVFormatError, ValueError, OSError) as exc:
        print(f"mrgp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
