"""Experiment configuration: a flat ``key = value`` text format.

Blank lines and ``#`` comments are ignored, and ``[section]`` headers may be
used to group keys (they do not namespace them). Lists are comma separated.
An empty value means "use the default". Unknown keys are rejected.

Keys marked *preset* default to whatever the chosen preset uses.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .harness import PRESETS, SWEEP_AXES, TrialConfig
from .kernels import KernelFamily
from .representations import RepresentationKind
from .simulation import NoiseKind, OUParams, SimSpec

OUTPUT_DIR_ENV = "MRGP_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _opt(kind: str, help: str, **kw):
    return field(metadata={"kind": kind, "help": help}, **kw)


@dataclass
class ExperimentConfig:
    preset: str = _opt("str", "sweep preset: noise | kernel | fat-tails | train-length", default="noise")
    sweep_values: tuple | None = _opt("list_str", "sweep axis values (preset)", default=None)
    amplitude: float = _opt("float", "seasonal sine amplitude", default=1.0)
    period: float | None = _opt("opt_float", "sine period in days (default days_per_year)", default=None)
    ou_lambda: float = _opt("float", "OU mean-reversion rate per day", default=0.01)
    ou_mu: float = _opt("float", "OU long-run mean", default=0.0)
    sigma: float | None = _opt("opt_float", "OU volatility (preset)", default=None)
    noise: str | None = _opt("opt_str", "gaussian | student_t (preset)", default=None)
    dof: float | None = _opt("opt_float", "Student-t degrees of freedom", default=None)
    n_years: int = _opt("int", "training length in years", default=10)
    days_per_year: int = _opt("int", "trading days per year", default=250)
    representations: tuple = _opt(
        "list_str", "one_dim, functional, augmented_1d, functional_augmented",
        default=tuple(k.value for k in RepresentationKind))
    kernels: tuple | None = _opt("list_str", "rbf, ou, matern32, rq (preset)", default=None)
    horizons: tuple = _opt("list_int", "MSE horizons in days", default=(10, 20, 30))
    forecast_horizon: int = _opt("int", "forecast length in days", default=50)
    n_test_paths: int = _opt("int", "simulated continuation paths per trial", default=1000)
    n_trials: int = _opt("int", "trials per sweep point", default=10)
    restarts: int = _opt("int", "optimizer restarts per GP", default=5)
    maxiter: int = _opt("int", "optimizer iterations per restart", default=200)
    subsample_budget: int = _opt("int", "delta>0 rows kept for augmented layouts", default=500)
    subsample_policy: str = _opt("str", "regular | random", default="regular")
    max_delta: int = _opt("int", "largest look-ahead in augmented rows", default=50)
    start_offsets: tuple | None = _opt("list_int", "observation days within the final year (default evenly spaced)", default=None)
    regime_source: str = _opt("str", "deterministic | realized", default="deterministic")
    regime_lookahead: int = _opt("int", "days ahead used by regime features", default=50)
    length_scale_upper_bound: float | None = _opt("opt_float", "cap on every length-scale", default=None)
    augmented_noise_floor: float = _opt(
        "float", "noise variance lower bound for augmented fits, as a fraction of var(y)", default=1e-2)
    seed: int = _opt("int", "master seed", default=0)
    output_dir: str = _opt("str", f"report directory (env {OUTPUT_DIR_ENV} overrides)", default="results")
    dump_forecasts: bool = _opt("bool", "write per-trial forecast CSVs", default=False)
    jobs: int = _opt("int", "parallel worker processes (0 = all cores)", default=0)

    # -- resolution ---------------------------------------------------------
    @property
    def axis(self) -> str:
        return PRESETS[self.preset]["axis"]

    def resolved_values(self) -> list:
        vals = self.sweep_values if self.sweep_values is not None else PRESETS[self.preset]["values"]
        if self.axis == "kernel":
            return [KernelFamily.parse(v).value for v in vals]
        if self.axis == "train_length":
            return [int(v) for v in vals]
        return [float(v) for v in vals]

    def trial_config(self) -> TrialConfig:
        p = PRESETS[self.preset]
        sigma = self.sigma if self.sigma is not None else p.get("sigma", 1.0)
        noise_kind = self.noise or ("student_t" if self.dof is not None else "gaussian")
        noise = NoiseKind.student_t(self.dof) if noise_kind == "student_t" else NoiseKind.gaussian()
        sim = SimSpec(
            amplitude=self.amplitude,
            period=self.period if self.period is not None else float(self.days_per_year),
            ou=OUParams(self.ou_lambda, self.ou_mu, sigma),
            noise=noise,
            n_years=self.n_years,
            days_per_year=self.days_per_year,
        )
        kernels = self.kernels or p.get("kernels", ("rq",))
        return TrialConfig(
            sim=sim,
            representations=tuple(self.representations),
            kernels=tuple(kernels),
            horizons=tuple(self.horizons),
            forecast_horizon=self.forecast_horizon,
            n_test_paths=self.n_test_paths,
            n_trials=self.n_trials,
            restarts=self.restarts,
            subsample_budget=self.subsample_budget,
            subsample_policy=self.subsample_policy,
            max_delta=self.max_delta,
            start_offsets=self.start_offsets,
            regime_source=self.regime_source,
            regime_lookahead=self.regime_lookahead,
            length_scale_upper_bound=self.length_scale_upper_bound,
            augmented_noise_floor=self.augmented_noise_floor,
            master_seed=self.seed,
            maxiter=self.maxiter,
        )

    def effective_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)

    def validate(self) -> "ExperimentConfig":
        if self.preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {self.preset!r}; expected one of {sorted(PRESETS)}")
        bad = [h for h in self.horizons if h > self.forecast_horizon]
        if bad:
            raise ConfigError(
                f"horizons: {bad} exceed forecast_horizon = {self.forecast_horizon}"
            )
        for key in ("n_trials", "n_test_paths", "restarts", "subsample_budget", "max_delta",
                    "forecast_horizon", "n_years", "days_per_year", "maxiter", "regime_lookahead"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be >= 1")
        if not 0 < self.augmented_noise_floor < 10:
            raise ConfigError("augmented_noise_floor: must lie in (0, 10)")
        if self.jobs < 0:
            raise ConfigError("jobs: must be >= 0")
        if self.noise not in (None, "gaussian", "student_t"):
            raise ConfigError(f"noise: expected gaussian or student_t, got {self.noise!r}")
        if self.noise == "student_t" and self.dof is None and self.axis != "dof":
            raise ConfigError("dof: required when noise = student_t")
        try:
            for r in self.representations:
                RepresentationKind.parse(r)
            for k in self.kernels or ():
                KernelFamily.parse(k)
            self.resolved_values()
            self.trial_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        assert self.axis in SWEEP_AXES
        return self


FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _convert(kind: str, raw: str) -> Any:
    raw = raw.strip()
    if kind.startswith("opt_") and raw.lower() in ("", "none"):
        return None
    if kind == "int":
        return int(raw)
    if kind in ("float", "opt_float"):
        return float(raw)
    if kind in ("str", "opt_str"):
        if not raw:
            raise ValueError("empty value")
        return raw
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if kind == "list_int":
        return tuple(int(s) for s in items)
    return tuple(items)


def set_value(cfg: ExperimentConfig, key: str, raw: str, where: str = "") -> ExperimentConfig:
    key = key.strip().replace("-", "_")
    if key not in FIELDS:
        raise ConfigError(f"{where}unknown key {key!r}")
    f = FIELDS[key]
    if raw.strip() == "" and f.default is not None:
        return replace(cfg, **{key: f.default})
    if raw.strip() == "" and f.metadata["kind"].startswith("list"):
        return replace(cfg, **{key: None})
    try:
        value = _convert(f.metadata["kind"], raw)
    except ValueError as exc:
        raise ConfigError(f"{where}{key}: {exc}") from None
    return replace(cfg, **{key: value})


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    cfg = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped or (stripped.startswith("[") and stripped.endswith("]")):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = stripped.split("=", 1)
        cfg = set_value(cfg, key, raw, f"{source}:{lineno}: ")
    try:
        return cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), str(path))


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for name, f in FIELDS.items():
        v = getattr(cfg, name)
        if v is None:
            s = ""
        elif isinstance(v, bool):
            s = "true" if v else "false"
        elif isinstance(v, tuple):
            s = ",".join(str(x) for x in v)
        else:
            s = repr(v) if isinstance(v, float) else str(v)
        lines.append(f"{name} = {s}")
    return "\n".join(lines) + "\n"


def help_text() -> str:
    rows = []
    for name, f in FIELDS.items():
        d = f.default
        if isinstance(d, tuple):
            d = ",".join(map(str, d))
        rows.append(f"  {name:26s} {f.metadata['help']} [default: {'' if d is None else d}]")
    return "config keys (file lines 'key = value' or flags --key=value):\n" + "\n".join(rows)
