"""Training-set layouts built from a daily series.

Four layouts are supported:

* ``one_dim``: absolute day -> price.
* ``functional``: (year, day-of-year) -> price, so prior years inform
  forecasts far from the latest observation.
* ``augmented_1d`` / ``functional_augmented``: one row per (observation day,
  look-ahead delta) pairing what was known at the observation day with the
  price ``delta`` days later.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .gp import TrainingSet


class RepresentationKind(str, Enum):
    ONE_DIM = "one_dim"
    FUNCTIONAL = "functional"
    AUGMENTED_1D = "augmented_1d"
    FUNCTIONAL_AUGMENTED = "functional_augmented"

    @classmethod
    def parse(cls, name: "str | RepresentationKind") -> "RepresentationKind":
        if isinstance(name, RepresentationKind):
            return name
        try:
            return cls(name.strip().lower().replace("-", "_"))
        except ValueError:
            raise ValueError(
                f"unknown representation {name!r}; expected one of "
                + ", ".join(k.value for k in cls)
            ) from None

    @property
    def augmented(self) -> bool:
        return self in (RepresentationKind.AUGMENTED_1D, RepresentationKind.FUNCTIONAL_AUGMENTED)


@dataclass(frozen=True)
class SeriesGrid:
    """Daily values; index ``k`` sits at absolute day ``start + k``."""

    values: np.ndarray
    days_per_year: int = 250
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 2:
            raise ValueError("a series needs at least 2 values")
        if not np.isfinite(v).all():
            raise ValueError("series contains non-finite values")
        if self.days_per_year < 1:
            raise ValueError("days_per_year must be positive")
        y0, d0 = self.origin
        if not 0 <= d0 < self.days_per_year:
            raise ValueError("origin day outside the year")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin", (int(y0), int(d0)))

    def __len__(self) -> int:
        return self.values.size

    @property
    def start(self) -> int:
        return self.origin[0] * self.days_per_year + self.origin[1]

    @property
    def days(self) -> np.ndarray:
        """Absolute day of every value."""
        return self.start + np.arange(len(self))

    def year_day(self, absolute_day):
        return np.divmod(np.asarray(absolute_day), self.days_per_year)

    def index_of(self, absolute_day: int) -> int:
        k = int(absolute_day) - self.start
        if not 0 <= k < len(self):
            raise IndexError(f"day {absolute_day} outside the grid")
        return k

    def value_at(self, absolute_day: int) -> float:
        return float(self.values[self.index_of(absolute_day)])


@dataclass(frozen=True)
class AugmentedRow:
    obs_year: int
    obs_day: int
    obs_price: float
    features: tuple[float, ...]
    delta: int
    target_price: float

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        object.__setattr__(self, "features", tuple(float(f) for f in self.features))


def build_one_dim(grid: SeriesGrid) -> TrainingSet:
    return TrainingSet(grid.days[:, None].astype(float), grid.values, ("time",))


def build_functional(grid: SeriesGrid) -> TrainingSet:
    year, day = grid.year_day(grid.days)
    return TrainingSet(np.c_[year, day].astype(float), grid.values, ("year", "day"))


FeatureFn = Callable[[int], Sequence[float]]


def build_augmented_rows(
    grid: SeriesGrid, features_fn: FeatureFn | None, max_delta: int
) -> list[AugmentedRow]:
    """Every (observation, delta) pair with ``0 <= delta <= max_delta`` inside the grid.

    ``features_fn`` receives the absolute observation day.
    """
    if max_delta < 1:
        raise ValueError("max_delta must be >= 1")
    n = len(grid)
    vals = grid.values
    rows = []
    for o in range(n):
        t = grid.start + o
        year, day = divmod(t, grid.days_per_year)
        feats = tuple(features_fn(t)) if features_fn is not None else ()
        for delta in range(min(max_delta, n - 1 - o) + 1):
            rows.append(AugmentedRow(int(year), int(day), float(vals[o]), feats, delta,
                                     float(vals[o + delta])))
    return rows


def subsample_rows(
    rows: Sequence[AugmentedRow],
    budget: int,
    seed: int = 0,
    policy: str = "regular",
    days_per_year: int = 250,
) -> list[AugmentedRow]:
    """Keep every delta-0 row plus ``budget`` of the delta>0 rows.

    ``regular`` strides over the delta>0 rows in input order (observation,
    then delta) with ``stride = count // budget`` starting at 0. The latest
    observation day's delta>0 rows are always kept, displacing the tail of
    the stride. ``random`` draws ``budget`` rows uniformly without
    replacement; ``seed`` is only used there.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    pos = [i for i, r in enumerate(rows) if r.delta > 0]
    if len(pos) <= budget:
        return list(rows)
    if policy == "regular":
        obs = lambda r: r.obs_year * days_per_year + r.obs_day  # noqa: E731
        last = max(obs(rows[i]) for i in pos)
        reserved = [i for i in pos if obs(rows[i]) == last][:budget]
        reserved_set = set(reserved)
        stride = len(pos) // budget
        strided = [pos[k * stride] for k in range(budget)]
        fill = [i for i in strided if i not in reserved_set][: budget - len(reserved)]
        keep = reserved_set.union(fill)
    elif policy == "random":
        rng = np.random.default_rng(seed)
        keep = set(rng.choice(pos, size=budget, replace=False).tolist())
    else:
        raise ValueError(f"unknown subsample policy {policy!r}")
    return [r for i, r in enumerate(rows) if r.delta == 0 or i in keep]


def to_training_set(
    rows: Sequence[AugmentedRow],
    kind: "RepresentationKind | str",
    days_per_year: int = 250,
    categorical_features: Sequence[bool] | None = None,
) -> TrainingSet:
    """Lay augmented rows out as a design matrix.

    Feature columns are flagged categorical (one-hot) unless
    ``categorical_features`` says otherwise.
    """
    kind = RepresentationKind.parse(kind)
    if not kind.augmented:
        raise ValueError(f"{kind.value} is not an augmented representation")
    if not rows:
        raise ValueError("no rows")
    n_feat = len(rows[0].features)
    cat_feat = (True,) * n_feat if categorical_features is None else tuple(categorical_features)
    if len(cat_feat) != n_feat:
        raise ValueError("categorical_features length does not match the feature count")
    feats = np.array([r.features for r in rows], dtype=float).reshape(len(rows), n_feat)
    price = np.array([r.obs_price for r in rows])
    delta = np.array([r.delta for r in rows], dtype=float)
    year = np.array([r.obs_year for r in rows], dtype=float)
    day = np.array([r.obs_day for r in rows], dtype=float)
    y = np.array([r.target_price for r in rows])
    if kind is RepresentationKind.FUNCTIONAL_AUGMENTED:
        X = np.column_stack([year, day, price, feats, delta])
        roles = ("year", "day", "feature") + ("feature",) * n_feat + ("delta",)
        cat = (False, False, False) + cat_feat + (False,)
    else:
        X = np.column_stack([year * days_per_year + day, price, feats, delta])
        roles = ("time", "feature") + ("feature",) * n_feat + ("delta",)
        cat = (False, False) + cat_feat + (False,)
    return TrainingSet(X, y, roles, cat)


@dataclass(frozen=True)
class ForecastQuery:
    X: np.ndarray
    horizons: np.ndarray
    # True when some delta exceeds the largest delta seen in training
    extrapolates: bool = False


def forecast_query_rows(
    grid: SeriesGrid,
    kind: "RepresentationKind | str",
    t0: int,
    horizon: int,
    frozen_features: Sequence[float] = (),
    max_delta: int | None = None,
) -> ForecastQuery:
    """Query rows for ``t0 + h``, ``h = 1..horizon``.

    For augmented kinds ``frozen_features`` is everything between the
    observation (year, day) and delta: the observed price followed by the
    feature vector, all held at their ``t0`` values.
    """
    kind = RepresentationKind.parse(kind)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    grid.index_of(t0)
    h = np.arange(1, horizon + 1)
    dpy = grid.days_per_year
    if kind is RepresentationKind.ONE_DIM:
        X = (t0 + h)[:, None].astype(float)
    elif kind is RepresentationKind.FUNCTIONAL:
        year, day = divmod(t0 + h, dpy)
        X = np.c_[year, day].astype(float)
    else:
        frozen = np.asarray(frozen_features, dtype=float).ravel()
        year, day = divmod(t0, dpy)
        lead = [year, day] if kind is RepresentationKind.FUNCTIONAL_AUGMENTED else [t0]
        fixed = np.concatenate([np.array(lead, dtype=float), frozen])
        X = np.column_stack([np.tile(fixed, (horizon, 1)), h.astype(float)])
    extrap = bool(kind.augmented and max_delta is not None and horizon > max_delta)
    return ForecastQuery(X, h, extrap)
