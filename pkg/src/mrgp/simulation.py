"""Seasonal + Ornstein-Uhlenbeck series simulation with exact transitions.

Random streams come from numpy's PCG64 seeded through ``SeedSequence``: the
training realization uses ``SeedSequence(seed, spawn_key=(0,))`` and test path
``p`` uses ``SeedSequence(seed, spawn_key=(1, p))``, so every path has its own
reproducible stream regardless of how many paths are drawn or in which order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _backend
from .representations import SeriesGrid


@dataclass(frozen=True)
class OUParams:
    lam: float = 0.01
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("mean-reversion rate must be > 0")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")

    @property
    def stationary_variance(self) -> float:
        return self.sigma**2 / (2.0 * self.lam)

    def transition(self, dt: float) -> tuple[float, float]:
        """Decay factor and innovation scale of an exact step of length ``dt``."""
        decay = math.exp(-self.lam * dt)
        scale = self.sigma * math.sqrt(-math.expm1(-2.0 * self.lam * dt) / (2.0 * self.lam))
        return decay, scale


@dataclass(frozen=True)
class NoiseKind:
    kind: str = "gaussian"
    dof: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "student_t" and not (self.dof is not None and self.dof > 0):
            raise ValueError("student_t noise needs dof > 0")

    @classmethod
    def gaussian(cls) -> "NoiseKind":
        return cls("gaussian")

    @classmethod
    def student_t(cls, dof: float) -> "NoiseKind":
        return cls("student_t", float(dof))


@dataclass(frozen=True)
class SimSpec:
    amplitude: float = 1.0
    period: float = 250.0
    ou: OUParams = field(default_factory=OUParams)
    noise: NoiseKind = field(default_factory=NoiseKind)
    n_years: int = 10
    days_per_year: int = 250
    seed: int = 0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be > 0")
        if self.n_years < 1:
            raise ValueError("n_years must be >= 1")

    def seasonal(self, t):
        """Deterministic component at absolute day(s) ``t``."""
        return self.amplitude * np.sin(2.0 * np.pi * np.asarray(t, dtype=float) / self.period)

    def with_seed(self, seed: int) -> "SimSpec":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class TestDistribution:
    __test__ = False  # not a pytest class

    paths: np.ndarray
    t0: int
    spec: SimSpec

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def horizon(self) -> int:
        return self.paths.shape[1]

    def column(self, h: int) -> np.ndarray:
        """Values of every path ``h`` days after ``t0`` (``h >= 1``)."""
        return self.paths[:, h - 1]


def ou_step_exact(x, p: OUParams, dt: float, z):
    """Exact OU transition over ``dt`` given a standard innovation ``z``."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    decay, scale = p.transition(dt)
    return p.mu + (np.asarray(x) - p.mu) * decay + scale * np.asarray(z)


def draw_innovations(noise: NoiseKind, rng: np.random.Generator, size) -> np.ndarray:
    """Unit-variance innovations (raw t draws when ``dof <= 2``)."""
    if noise.kind == "gaussian":
        return rng.standard_normal(size)
    z = rng.standard_t(noise.dof, size)
    if noise.dof > 2:
        z *= math.sqrt((noise.dof - 2.0) / noise.dof)
    return z


def draw_innovation(noise: NoiseKind, rng: np.random.Generator) -> float:
    return float(draw_innovations(noise, rng, 1)[0])


def _series_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def _path_rng(seed: int, path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, path)))


def simulate_series(spec: SimSpec, n_days: int | None = None) -> tuple[SeriesGrid, float]:
    """Simulate ``seasonal + OU`` from day 0 with the OU started at its mean.

    Returns the grid and the OU component's value on the final day.
    """
    n = spec.n_years * spec.days_per_year if n_days is None else int(n_days)
    if n < 2:
        raise ValueError("need at least 2 days")
    z = draw_innovations(spec.noise, _series_rng(spec.seed), n - 1)
    decay, scale = spec.ou.transition(1.0)
    ou = np.empty(n)
    ou[0] = spec.ou.mu
    ou[1:] = _backend.ou_recurse(np.array([spec.ou.mu]), spec.ou.mu, decay, scale, z[None, :])[0]
    values = spec.seasonal(np.arange(n)) + ou
    return SeriesGrid(values, spec.days_per_year), float(ou[-1])


def regime_onehot(
    component: Callable[[int], float],
    t: int,
    lookahead: int = 50,
    level_ref: float = 0.0,
    last_day: int | None = None,
) -> tuple[int, int, int]:
    """Classify ``t`` as high-and-declining, low-and-ascending, or neither.

    The move is ``component(t + lookahead) - component(t)``. With
    ``last_day`` the lookahead is cut to what remains (at least one day, and
    zero once ``t`` is the last day).
    """
    if lookahead < 1:
        raise ValueError("lookahead must be >= 1")
    ahead = t + lookahead
    if last_day is not None:
        ahead = min(ahead, last_day)
    level = float(component(t))
    move = float(component(ahead)) - level
    if level > level_ref and move < 0:
        return (1, 0, 0)
    if level < level_ref and move > 0:
        return (0, 1, 0)
    return (0, 0, 1)


def simulate_test_paths(
    spec: SimSpec, t0: int, ou_state_at_t0: float, n_paths: int = 1000, horizon: int = 50
) -> TestDistribution:
    """Continue the series from ``t0`` ``n_paths`` times over ``horizon`` days."""
    if n_paths < 1 or horizon < 1:
        raise ValueError("n_paths and horizon must be >= 1")
    Z = np.empty((n_paths, horizon))
    for p in range(n_paths):
        Z[p] = draw_innovations(spec.noise, _path_rng(spec.seed, p), horizon)
    decay, scale = spec.ou.transition(1.0)
    ou = _backend.ou_recurse(np.full(n_paths, float(ou_state_at_t0)), spec.ou.mu, decay, scale, Z)
    paths = ou + spec.seasonal(t0 + np.arange(1, horizon + 1))[None, :]
    paths.setflags(write=False)
    return TestDistribution(paths, int(t0), spec)
