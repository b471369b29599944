"""AR(1) benchmark: conditional maximum likelihood and closed-form forecasts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gp import ForecastDistribution

_PHI_CLAMP = 1.0 - 1e-6


class InsufficientDataError(ValueError):
    pass


class DegenerateSeriesError(ValueError):
    pass


@dataclass(frozen=True)
class AR1Params:
    phi: float
    c: float
    sigma2: float
    nonstationary: bool = False

    @property
    def mu(self) -> float:
        return self.c / (1.0 - self.phi)


def fit_ar1_mle(series) -> AR1Params:
    """Fit ``y_t = c + phi * y_{t-1} + e_t`` by lag-regression least squares.

    This is the Gaussian likelihood conditional on the first value. An
    estimate with ``|phi| >= 1`` is clamped just inside the unit circle and
    flagged.
    """
    y = np.asarray(series, dtype=float).ravel()
    if y.size < 10:
        raise InsufficientDataError(f"AR(1) needs at least 10 points, got {y.size}")
    if not np.isfinite(y).all():
        raise ValueError("series contains non-finite values")
    x, t = y[:-1], y[1:]
    xm, tm = x.mean(), t.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx <= 0.0 or np.ptp(y) == 0.0:
        raise DegenerateSeriesError("constant series")
    phi = float(np.sum((x - xm) * (t - tm)) / sxx)
    c = float(tm - phi * xm)
    sigma2 = float(np.mean((t - c - phi * x) ** 2))
    nonstationary = abs(phi) >= 1.0
    if nonstationary:
        phi = float(np.sign(phi)) * _PHI_CLAMP
        # keep the intercept consistent with the clamped slope
        c = float(tm - phi * xm)
        sigma2 = float(np.mean((t - c - phi * x) ** 2))
    if sigma2 <= 0.0:
        sigma2 = np.finfo(float).tiny
    return AR1Params(phi, c, sigma2, nonstationary)


def ar1_forecast(p: AR1Params, x0: float, horizon: int) -> ForecastDistribution:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not abs(p.phi) < 1.0:
        raise ValueError("forecast formulas need |phi| < 1")
    h = np.arange(1, horizon + 1)
    ph = p.phi**h
    # iterate c + phi * m so that h=1 is the one-step regression value exactly
    mean = np.empty(horizon)
    m = float(x0)
    for k in range(horizon):
        m = p.c + p.phi * m
        mean[k] = m
    var = p.sigma2 * (1.0 - ph * ph) / (1.0 - p.phi**2)
    return ForecastDistribution(h, mean, np.sqrt(var))
