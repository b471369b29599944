"""Simulation-based evaluation of GP forecasts against the AR(1) benchmark.

A trial simulates one training realization, fits every configured model,
forecasts from the last training day, and scores the forecast against many
simulated continuations from that same day. A sweep repeats trials over one
varying parameter.

Trial ``k`` of sweep ``s`` is seeded from ``SeedSequence([master_seed, s, k])``;
the seed does not depend on the sweep point, so every point of a sweep sees
the same random streams and differs only in the swept parameter.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .baseline import ar1_forecast, fit_ar1_mle
from .gp import FitError, ForecastDistribution, OptimizationError, optimize_hyperparams, predict
from .kernels import KernelFamily, KernelSpec
from .representations import (
    RepresentationKind,
    SeriesGrid,
    build_augmented_rows,
    build_functional,
    build_one_dim,
    forecast_query_rows,
    subsample_rows,
    to_training_set,
)
from .simulation import (
    NoiseKind,
    SimSpec,
    TestDistribution,
    regime_onehot,
    simulate_series,
    simulate_test_paths,
)

log = logging.getLogger(__name__)

SWEEP_AXES = ("sigma", "kernel", "dof", "train_length")
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class TrialConfig:
    sim: SimSpec = field(default_factory=SimSpec)
    representations: tuple[RepresentationKind, ...] = tuple(RepresentationKind)
    kernels: tuple[KernelFamily, ...] = (KernelFamily.RQ,)
    horizons: tuple[int, ...] = (10, 20, 30)
    forecast_horizon: int = 50
    n_test_paths: int = 1000
    n_trials: int = 10
    restarts: int = 5
    subsample_budget: int = 500
    subsample_policy: str = "regular"
    max_delta: int = 50
    start_offsets: tuple[int, ...] | None = None
    regime_source: str = "deterministic"
    regime_lookahead: int = 50
    length_scale_upper_bound: float | None = None
    # lower bound on the noise variance of augmented fits, relative to var(y)
    augmented_noise_floor: float = 1e-2
    master_seed: int = 0
    maxiter: int = 200

    def __post_init__(self):
        object.__setattr__(self, "representations",
                           tuple(RepresentationKind.parse(r) for r in self.representations))
        object.__setattr__(self, "kernels", tuple(KernelFamily.parse(k) for k in self.kernels))
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if any(h < 1 or h > self.forecast_horizon for h in self.horizons):
            raise ValueError("every horizon must lie in 1..forecast_horizon")
        if self.regime_source not in ("deterministic", "realized"):
            raise ValueError(f"unknown regime_source {self.regime_source!r}")
        if self.subsample_policy not in ("regular", "random"):
            raise ValueError(f"unknown subsample_policy {self.subsample_policy!r}")
        if self.start_offsets is not None:
            offs = tuple(int(o) for o in self.start_offsets)
            if not offs or any(not 0 <= o < self.sim.days_per_year for o in offs):
                raise ValueError("start_offsets must lie within one year")
            object.__setattr__(self, "start_offsets", offs)

    def offset(self, trial_index: int) -> int:
        """Day within the final training year at which trial ``trial_index`` observes."""
        if self.start_offsets is not None:
            return self.start_offsets[trial_index % len(self.start_offsets)]
        return (trial_index % self.n_trials) * self.sim.days_per_year // self.n_trials


@dataclass
class ModelResult:
    model: str
    representation: str
    kernel: str
    mse: dict[int, float] = field(default_factory=dict)
    path_mse: dict[int, float] = field(default_factory=dict)
    trajectory_mse: float = math.nan
    std_abs_err: dict[int, float] = field(default_factory=dict)
    coverage_2sigma: float = math.nan
    diverged: bool = False
    error: str | None = None
    lml: float | None = None
    theta: tuple[float, ...] | None = None
    forecast: ForecastDistribution | None = None
    extrapolates: bool = False

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.model, self.representation, self.kernel)


@dataclass
class TrialResult:
    trial_index: int
    seed: int
    t0: int
    models: list[ModelResult]
    empirical_mean: np.ndarray
    empirical_std: np.ndarray

    def get(self, model: str, representation: str = "raw", kernel: str = "none") -> ModelResult:
        for m in self.models:
            if m.key == (model, representation, kernel):
                return m
        raise KeyError((model, representation, kernel))


@dataclass
class AggregateRow:
    model: str
    representation: str
    kernel: str
    mean: dict[str, float]
    std: dict[str, float]
    diverged: int
    n_trials: int


@dataclass
class SweepPoint:
    value: object
    trials: list[TrialResult]
    rows: list[AggregateRow]


@dataclass
class SweepReport:
    axis: str
    points: list[SweepPoint]
    horizons: tuple[int, ...] = (10, 20, 30)

    def __post_init__(self):
        if not self.points:
            raise ValueError("a sweep report needs at least one point")


# -- metrics ---------------------------------------------------------------

def mse_at_horizon(pred_mean: float, column) -> float:
    """Squared error of the predicted mean against the empirical test mean."""
    column = np.asarray(column, dtype=float)
    if column.size < 1:
        raise ValueError("need at least one path")
    return float((pred_mean - column.mean()) ** 2)


def path_mse_at_horizon(pred_mean: float, column) -> float:
    """Squared error averaged over paths; exceeds the primary by the path variance."""
    column = np.asarray(column, dtype=float)
    return float(np.mean((pred_mean - column) ** 2))


def _paths(paths) -> np.ndarray:
    return paths.paths if isinstance(paths, TestDistribution) else np.asarray(paths, dtype=float)


def trajectory_mse(pred_mean, paths) -> float:
    """Mean over ``h = 1..H`` of the primary per-horizon MSE."""
    P = _paths(paths)
    pred_mean = np.asarray(pred_mean, dtype=float)
    H = pred_mean.size
    if H > P.shape[1]:
        raise ValueError("forecast longer than the test paths")
    return float(np.mean((pred_mean - P[:, :H].mean(axis=0)) ** 2))


def std_metrics(pred_mean, pred_std, paths, horizons: Sequence[int]):
    """Absolute std error at each horizon and the 2-sigma coverage over all (path, h)."""
    P = _paths(paths)
    pred_mean = np.asarray(pred_mean, dtype=float)
    pred_std = np.asarray(pred_std, dtype=float)
    H = pred_std.size
    if H > P.shape[1]:
        raise ValueError("forecast longer than the test paths")
    emp_std = P[:, :H].std(axis=0)
    errs = {int(h): float(abs(pred_std[h - 1] - emp_std[h - 1])) for h in horizons}
    with np.errstate(invalid="ignore"):
        dev = np.abs(P[:, :H] - pred_mean[None, :])
        inside = dev <= 2.0 * pred_std[None, :]
    return errs, float(np.mean(inside))


def _score(res: ModelResult, fc: ForecastDistribution, test: TestDistribution,
           cfg: TrialConfig, threshold: float) -> None:
    H = cfg.forecast_horizon
    res.forecast = fc
    for h in cfg.horizons:
        col = test.column(h)
        res.mse[h] = mse_at_horizon(fc.mean[h - 1], col)
        res.path_mse[h] = path_mse_at_horizon(fc.mean[h - 1], col)
    res.trajectory_mse = trajectory_mse(fc.mean[:H], test)
    res.std_abs_err, res.coverage_2sigma = std_metrics(fc.mean[:H], fc.std[:H], test, cfg.horizons)
    values = [*res.mse.values(), res.trajectory_mse, *res.std_abs_err.values()]
    res.diverged = any(not math.isfinite(v) or v > threshold for v in values)


# -- trials ----------------------------------------------------------------

def trial_seed(master_seed: int, sweep_id: int, trial_index: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(sweep_id), int(trial_index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def divergence_threshold(sim: SimSpec) -> float:
    scale = sim.ou.stationary_variance + 0.5 * sim.amplitude**2
    return DIVERGENCE_FACTOR * max(scale, 1e-12)


def _regime_fn(cfg: TrialConfig, sim: SimSpec, grid: SeriesGrid) -> Callable[[int], tuple]:
    if cfg.regime_source == "deterministic":
        return lambda t: regime_onehot(sim.seasonal, t, cfg.regime_lookahead)
    last = grid.start + len(grid) - 1
    return lambda t: regime_onehot(grid.value_at, t, cfg.regime_lookahead, last_day=last)


def _gp_training_set(kind, grid, cfg, rows_cache, seed):
    if kind is RepresentationKind.ONE_DIM:
        return build_one_dim(grid)
    if kind is RepresentationKind.FUNCTIONAL:
        return build_functional(grid)
    return to_training_set(rows_cache(), kind, grid.days_per_year)


def run_trial(cfg: TrialConfig, trial_index: int, sweep_id: int = 0) -> TrialResult:
    """Simulate, fit every model, forecast, and score against simulated continuations."""
    seed = trial_seed(cfg.master_seed, sweep_id, trial_index)
    sim = cfg.sim.with_seed(seed)
    dpy = sim.days_per_year
    n_days = (sim.n_years - 1) * dpy + cfg.offset(trial_index) + 1
    grid, ou_state = simulate_series(sim, n_days)
    t0 = grid.start + len(grid) - 1
    H = cfg.forecast_horizon
    test = simulate_test_paths(sim, t0, ou_state, cfg.n_test_paths, H)
    threshold = divergence_threshold(sim)
    regime = _regime_fn(cfg, sim, grid)

    cached: list = []

    def rows_cache():
        if not cached:
            rows = build_augmented_rows(grid, regime, cfg.max_delta)
            cached.append(subsample_rows(rows, cfg.subsample_budget, seed,
                                         cfg.subsample_policy, dpy))
        return cached[0]

    results: list[ModelResult] = []

    ar = ModelResult("ar1", "raw", "none")
    try:
        p = fit_ar1_mle(grid.values)
        _score(ar, ar1_forecast(p, grid.values[-1], H), test, cfg, threshold)
        ar.theta = (p.phi, p.c, p.sigma2)
    except ValueError as exc:
        ar.diverged, ar.error = True, str(exc)
    results.append(ar)

    frozen = (grid.values[-1], *regime(t0))
    for fam in cfg.kernels:
        for kind in cfg.representations:
            res = ModelResult("gp", kind.value, fam.value)
            try:
                ts = _gp_training_set(kind, grid, cfg, rows_cache, seed)
                spec = KernelSpec.default(fam, categorical=ts.categorical)
                gp = optimize_hyperparams(
                    ts, spec, cfg.restarts, seed,
                    length_scale_upper_bound=cfg.length_scale_upper_bound,
                    maxiter=cfg.maxiter,
                    noise_floor=cfg.augmented_noise_floor if kind.augmented else 1e-12,
                )
                q = forecast_query_rows(grid, kind, t0, H, frozen, cfg.max_delta)
                fc = predict(gp, q.X, observation=True, horizons=q.horizons)
                _score(res, fc, test, cfg, threshold)
                res.lml, res.theta = gp.lml, tuple(gp.spec.theta)
                res.extrapolates = q.extrapolates
            except (FitError, OptimizationError, np.linalg.LinAlgError, ValueError) as exc:
                log.warning("trial %d: %s/%s failed: %s", trial_index, kind.value, fam.value, exc)
                res.diverged, res.error = True, str(exc)
            results.append(res)

    return TrialResult(trial_index, seed, t0, results,
                       test.paths.mean(axis=0), test.paths.std(axis=0))


# -- sweeps ----------------------------------------------------------------

def apply_axis(cfg: TrialConfig, axis: str, value) -> TrialConfig:
    sim = cfg.sim
    if axis == "sigma":
        return replace(cfg, sim=replace(sim, ou=replace(sim.ou, sigma=float(value))))
    if axis == "kernel":
        return replace(cfg, kernels=(KernelFamily.parse(value),))
    if axis == "dof":
        return replace(cfg, sim=replace(sim, noise=NoiseKind.student_t(float(value))))
    if axis == "train_length":
        return replace(cfg, sim=replace(sim, n_years=int(value)))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def _metric_names(horizons) -> list[str]:
    return ([f"mse_h{h}" for h in horizons] + ["trajectory_mse"]
            + [f"std_err_h{h}" for h in horizons] + ["coverage_2sigma"])


def _metric_values(m: ModelResult, horizons) -> list[float]:
    return ([m.mse.get(h, math.nan) for h in horizons] + [m.trajectory_mse]
            + [m.std_abs_err.get(h, math.nan) for h in horizons] + [m.coverage_2sigma])


def aggregate(trials: Sequence[TrialResult], horizons: Sequence[int]) -> list[AggregateRow]:
    """Mean and std of every metric per model over the non-diverged trials."""
    names = _metric_names(horizons)
    keys = [m.key for m in trials[0].models]
    rows = []
    for key in keys:
        ms = [t.get(*key) for t in trials]
        ok = [m for m in ms if not m.diverged]
        vals = np.array([_metric_values(m, horizons) for m in ok]).reshape(len(ok), len(names))
        if ok:
            mean, std = vals.mean(axis=0), vals.std(axis=0)
        else:
            mean = std = np.full(len(names), math.nan)
        rows.append(AggregateRow(*key, dict(zip(names, mean.tolist())),
                                 dict(zip(names, std.tolist())), len(ms) - len(ok), len(ms)))
    return rows


def _run_task(args):
    cfg, trial_index, sweep_id = args
    return run_trial(cfg, trial_index, sweep_id)


def run_sweep(
    cfg: TrialConfig,
    axis: str,
    values: Sequence,
    sweep_id: int = 0,
    jobs: int = 1,
    progress: Callable[[str], None] | None = None,
) -> SweepReport:
    """Run ``cfg.n_trials`` trials at every sweep value and aggregate."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ValueError("sweep values must be non-empty")
    cfgs = [apply_axis(cfg, axis, v) for v in values]
    tasks = [(c, k, sweep_id) for c in cfgs for k in range(cfg.n_trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_task, tasks))
    else:
        results = []
        for i, t in enumerate(tasks):
            results.append(_run_task(t))
            if progress:
                progress(f"{axis}={values[i // cfg.n_trials]} trial {t[1] + 1}/{cfg.n_trials}")
    points = []
    for i, v in enumerate(values):
        trials = results[i * cfg.n_trials:(i + 1) * cfg.n_trials]
        points.append(SweepPoint(v, trials, aggregate(trials, cfg.horizons)))
    return SweepReport(axis, points, cfg.horizons)


PRESETS: dict[str, dict] = {
    "noise": {"axis": "sigma", "values": (0.0001, 0.1, 0.2, 0.38, 0.5, 1.0), "kernels": ("rq",)},
    "kernel": {"axis": "kernel", "values": ("rq", "ou", "matern32", "rbf"), "sigma": 1.0},
    "fat-tails": {"axis": "dof", "values": (1000, 100, 50, 20, 15, 5, 3, 2),
                  "sigma": 0.38, "kernels": ("rq",)},
    "train-length": {"axis": "train_length", "values": (10, 6, 4, 2),
                     "sigma": 0.38, "kernels": ("rq",)},
}


# -- trade selection -------------------------------------------------------

@dataclass(frozen=True)
class TradeDecision:
    best_horizon: float | None
    sharpe: np.ndarray
    direction: np.ndarray
    excluded: tuple[float, ...] = ()

    @property
    def trade(self) -> bool:
        return self.best_horizon is not None


def expected_sharpe_select(
    fc: ForecastDistribution, current_price: float, cost_per_trade: float
) -> TradeDecision:
    """Pick the horizon with the best cost-adjusted expected Sharpe ratio.

    ``sharpe_h = (|mean_h - price| - cost) / std_h``; horizons with zero std
    are excluded. Ties go to the earliest horizon; no trade when the best
    ratio is not positive.
    """
    if cost_per_trade < 0:
        raise ValueError("cost must be >= 0")
    move = fc.mean - current_price
    usable = fc.std > 0
    sharpe = np.full(fc.mean.shape, math.nan)
    sharpe[usable] = (np.abs(move[usable]) - cost_per_trade) / fc.std[usable]
    excluded = tuple(fc.horizons[~usable].tolist())
    if not usable.any():
        return TradeDecision(None, sharpe, np.sign(move), excluded)
    best = int(np.nanargmax(sharpe))
    horizon = float(fc.horizons[best]) if sharpe[best] > 0 else None
    return TradeDecision(horizon, sharpe, np.sign(move), excluded)
