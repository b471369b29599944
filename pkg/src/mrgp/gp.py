"""Exact GP regression: Cholesky fit, marginal likelihood, multi-restart optimization.

Targets are centered by their training mean and modelled as a zero-mean GP;
the center is added back at prediction time.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.linalg import lapack
from scipy.optimize import minimize

from .kernels import KernelFamily, KernelSpec, contract_kernel_grad, kernel_matrix, kernel_parts

log = logging.getLogger(__name__)

DIM_ROLES = ("year", "day", "feature", "delta", "time")
_LOG_2PI = math.log(2.0 * math.pi)


class FitError(RuntimeError):
    """Cholesky of the regularized kernel matrix failed even with maximal jitter."""

    def __init__(self, message: str, spec: KernelSpec | None = None):
        super().__init__(message)
        self.spec = spec


class OptimizationError(RuntimeError):
    """Every optimizer restart failed."""


@dataclass(frozen=True)
class TrainingSet:
    X: np.ndarray
    y: np.ndarray
    dim_roles: tuple[str, ...]
    categorical: tuple[bool, ...] | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 2:
            raise ValueError("a training set needs at least 2 rows")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("training data contains non-finite entries")
        roles = tuple(self.dim_roles)
        if len(roles) != X.shape[1]:
            raise ValueError(f"{len(roles)} dim_roles for {X.shape[1]} columns")
        bad = [r for r in roles if r not in DIM_ROLES]
        if bad:
            raise ValueError(f"unknown dim roles {bad}")
        cat = (False,) * X.shape[1] if self.categorical is None else tuple(map(bool, self.categorical))
        if len(cat) != X.shape[1]:
            raise ValueError("categorical flags do not match the column count")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "dim_roles", roles)
        object.__setattr__(self, "categorical", cat)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class ForecastDistribution:
    horizons: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        h, m, s = (np.asarray(a, dtype=float).ravel() for a in (self.horizons, self.mean, self.std))
        if not (h.shape == m.shape == s.shape):
            raise ValueError("horizons, mean and std must have equal length")
        if np.any(s < 0):
            raise ValueError("negative standard deviation")
        object.__setattr__(self, "horizons", h)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", s)


@dataclass(frozen=True)
class TrainedGP:
    training_set: TrainingSet
    spec: KernelSpec
    chol: np.ndarray
    weights: np.ndarray
    lml: float
    y_center: float
    jitter: float = 0.0
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def noise_variance(self) -> float:
        return self.spec.hyper.noise_variance


def _cholesky_with_jitter(A: np.ndarray) -> tuple[np.ndarray, float]:
    L, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info == 0:
        return L, 0.0
    scale = abs(float(np.mean(np.diag(A)))) or 1.0
    jitter = 1e-10 * scale
    while jitter <= 1e-4 * scale * (1 + 1e-12):
        L, info = lapack.dpotrf(A + jitter * np.eye(A.shape[0]), lower=1, clean=1)
        if info == 0:
            return L, jitter
        jitter *= 10.0
    raise np.linalg.LinAlgError("matrix not positive definite up to jitter 1e-4*mean(diag)")


def _factorize(spec: KernelSpec, X: np.ndarray, yc: np.ndarray):
    parts = kernel_parts(spec, X)
    A = parts.K + spec.hyper.noise_variance * np.eye(parts.K.shape[0])
    try:
        L, jitter = _cholesky_with_jitter(A)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"{exc} (hyperparameters: {spec.hyper})", spec) from exc
    w = linalg.cho_solve((L, True), yc, check_finite=False)
    lml = -0.5 * float(yc @ w) - float(np.sum(np.log(np.diag(L)))) - 0.5 * len(yc) * _LOG_2PI
    return parts, L, w, jitter, lml


def fit(ts: TrainingSet, spec: KernelSpec) -> TrainedGP:
    """Fit the GP at fixed hyperparameters."""
    if spec.n_dims != ts.d:
        raise ValueError(f"kernel expects {spec.n_dims} columns, training set has {ts.d}")
    center = float(np.mean(ts.y))
    yc = ts.y - center
    _, L, w, jitter, lml = _factorize(spec, ts.X, yc)
    return TrainedGP(ts, spec, L, w, lml, center, jitter)


def _inverse_from_chol(L: np.ndarray) -> np.ndarray:
    inv, info = lapack.dpotri(L, lower=1)
    if info != 0:
        inv = linalg.cho_solve((L, True), np.eye(L.shape[0]), check_finite=False)
        return inv
    inv = np.tril(inv)
    return inv + np.tril(inv, -1).T


def _lml_grad(spec: KernelSpec, X: np.ndarray, L: np.ndarray, w: np.ndarray, parts=None):
    W = np.outer(w, w) - _inverse_from_chol(L)
    kgrad = contract_kernel_grad(spec, X, W, parts)
    # the jitter is a constant shift and carries no gradient
    noise = spec.hyper.noise_variance * float(np.trace(W))
    return 0.5 * np.append(kgrad, noise)


def log_marginal_likelihood_grad(gp: TrainedGP) -> np.ndarray:
    """Gradient of the lml w.r.t. ``gp.spec.theta`` (noise last)."""
    return _lml_grad(gp.spec, gp.training_set.X, gp.chol, gp.weights)


def log_marginal_likelihood(ts: TrainingSet, spec: KernelSpec) -> float:
    return fit(ts, spec).lml


def _spans(X: np.ndarray) -> np.ndarray:
    span = np.ptp(X, axis=0)
    return np.where(span > 0, span, 1.0)


def _bounds(ts: TrainingSet, spec: KernelSpec, length_scale_upper_bound: float | None,
            noise_floor: float = 1e-12):
    var_y = max(float(np.var(ts.y)), 1e-12)
    span = _spans(ts.X)
    lv = math.log(var_y)
    b = [(lv + math.log(1e-4), lv + math.log(1e4))]
    for s in span:
        hi = math.log(1e3 * s)
        if length_scale_upper_bound is not None:
            hi = min(hi, math.log(length_scale_upper_bound))
        b.append((math.log(1e-3 * s), hi))
    if spec.family is KernelFamily.RQ:
        b.append((math.log(1e-3), math.log(1e4)))
    b.append((lv + math.log(noise_floor), lv + math.log(10.0)))
    return b


def initial_draw(ts: TrainingSet, spec: KernelSpec, rng: np.random.Generator) -> np.ndarray:
    """Scale-aware random starting point in log space."""
    var_y = max(float(np.var(ts.y)), 1e-12)
    span = _spans(ts.X)
    theta = [rng.uniform(math.log(0.1 * var_y), math.log(10.0 * var_y))]
    theta.extend(rng.uniform(np.log(0.1 * span), np.log(2.0 * span)))
    if spec.family is KernelFamily.RQ:
        theta.append(rng.uniform(math.log(0.1), math.log(10.0)))
    theta.append(rng.uniform(math.log(1e-4 * var_y), math.log(var_y)))
    return np.array(theta)


def optimize_hyperparams(
    ts: TrainingSet,
    spec: KernelSpec,
    restarts: int = 5,
    seed: int = 0,
    init: Sequence[float] | None = None,
    length_scale_upper_bound: float | None = None,
    maxiter: int = 200,
    noise_floor: float = 1e-12,
) -> TrainedGP:
    """Maximize the log marginal likelihood with L-BFGS-B from several starts.

    Restart ``r`` draws its start from ``default_rng(seed + r)``; if ``init`` is
    given it replaces the first draw. The best restart wins, ties going to the
    lowest index. The noise variance is bounded below by
    ``noise_floor * var(y)``.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if not 0 < noise_floor < 10:
        raise ValueError("noise_floor must lie in (0, 10)")
    if spec.n_dims != ts.d:
        raise ValueError(f"kernel expects {spec.n_dims} columns, training set has {ts.d}")
    X = ts.X
    center = float(np.mean(ts.y))
    yc = ts.y - center
    bounds = _bounds(ts, spec, length_scale_upper_bound, noise_floor)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def objective(theta):
        s = spec.with_theta(theta)
        try:
            parts, L, w, _, lml = _factorize(s, X, yc)
        except FitError:
            return np.inf, np.zeros_like(theta)
        g = _lml_grad(s, X, L, w, parts)
        return -lml, -g

    best: tuple[float, np.ndarray] | None = None
    records = []
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        theta0 = initial_draw(ts, spec, rng)
        if r == 0 and init is not None:
            theta0 = np.asarray(init, dtype=float)
        theta0 = np.clip(theta0, lo, hi)
        f0, _ = objective(theta0)
        if not np.isfinite(f0):
            records.append({"restart": r, "initial_lml": None, "lml": None})
            continue
        res = minimize(
            objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": maxiter, "gtol": 1e-5, "ftol": 1e-12},
        )
        theta, f = res.x, res.fun
        if not np.isfinite(f) or f > f0:
            theta, f = theta0, f0
        records.append({"restart": r, "initial_lml": -f0, "lml": -f, "nit": int(res.nit)})
        if best is None or -f > best[0]:
            best = (-f, theta)
    if best is None:
        raise OptimizationError("all restarts failed the Cholesky factorization")
    gp = fit(ts, spec.with_theta(best[1]))
    gp.diagnostics.update(restarts=records)
    return gp


def predict(
    gp: TrainedGP,
    Xstar,
    full_cov: bool = False,
    observation: bool = False,
    horizons: Sequence[float] | None = None,
):
    """Posterior predictive mean and std at ``Xstar``.

    The std is of the latent function unless ``observation`` is set, in which
    case the noise variance is added. With ``full_cov`` the posterior
    covariance matrix is returned as a second value.
    """
    spec = gp.spec
    Xstar = np.atleast_2d(np.asarray(Xstar, dtype=float))
    if Xstar.shape[1] != gp.training_set.d:
        raise ValueError(f"queries have {Xstar.shape[1]} columns, model expects {gp.training_set.d}")
    Ks = kernel_matrix(spec, gp.training_set.X, Xstar)
    mean = Ks.T @ gp.weights + gp.y_center
    V = linalg.solve_triangular(gp.chol, Ks, lower=True, check_finite=False)
    prior = spec.hyper.signal_variance
    var = np.maximum(prior - np.einsum("ij,ij->j", V, V), 0.0)
    if observation:
        var = var + spec.hyper.noise_variance
    h = np.arange(1, len(mean) + 1) if horizons is None else horizons
    fd = ForecastDistribution(h, mean, np.sqrt(var))
    if not full_cov:
        return fd
    cov = kernel_matrix(spec, Xstar) - V.T @ V
    cov = 0.5 * (cov + cov.T)
    if observation:
        cov = cov + spec.hyper.noise_variance * np.eye(cov.shape[0])
    return fd, cov
