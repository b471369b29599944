"""Stationary ARD covariance functions and their log-hyperparameter gradients.

A kernel is the product of a continuous factor (one of the four families
below, evaluated on the ARD-scaled distance over the continuous columns) and
a squared-exponential ARD factor over the one-hot columns, scaled once by the
signal variance::

    k(x, x') = sf2 * f(r^2) * exp(-s^2 / 2)
    r^2 = sum_{d continuous}  ((x_d - x'_d) / l_d)^2
    s^2 = sum_{d categorical} ((x_d - x'_d) / l_d)^2

Every hyperparameter lives in log space. The flat parameter vector used by the
optimizer is ``[log sf2, log l_1, ..., log l_D, (log alpha), log sn2]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import _backend

_SQRT3 = math.sqrt(3.0)


class KernelFamily(str, Enum):
    RBF = "rbf"
    OU = "ou"
    MATERN32 = "matern32"
    RQ = "rq"

    @classmethod
    def parse(cls, name: "str | KernelFamily") -> "KernelFamily":
        if isinstance(name, KernelFamily):
            return name
        key = name.strip().lower()
        aliases = {"se": "rbf", "squaredexponential": "rbf", "exponential": "ou",
                   "matern12": "ou", "rationalquadratic": "rq"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(
                f"unknown kernel family {name!r}; expected one of "
                + ", ".join(f.value for f in cls)
            ) from None


@dataclass(frozen=True)
class HyperParams:
    """Log-parameterized kernel and noise hyperparameters."""

    log_signal_variance: float
    log_length_scales: tuple[float, ...]
    log_noise_variance: float
    log_alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "log_length_scales", tuple(float(v) for v in self.log_length_scales)
        )
        vals = [self.log_signal_variance, self.log_noise_variance, *self.log_length_scales]
        if self.log_alpha is not None:
            vals.append(self.log_alpha)
        for v in vals:
            # exp must stay finite and strictly positive in float64
            if not math.isfinite(v) or abs(v) > 700.0:
                raise ValueError(f"non-finite hyperparameter {v!r}")

    @property
    def signal_variance(self) -> float:
        return math.exp(self.log_signal_variance)

    @property
    def noise_variance(self) -> float:
        return math.exp(self.log_noise_variance)

    @property
    def length_scales(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_length_scales))

    @property
    def alpha(self) -> float | None:
        return None if self.log_alpha is None else math.exp(self.log_alpha)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, column layout, and hyperparameters.

    ``categorical`` flags each input column; flagged columns get the
    squared-exponential ARD factor, the rest the chosen family.
    """

    family: KernelFamily
    categorical: tuple[bool, ...]
    hyper: HyperParams = field(compare=True)

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily.parse(self.family))
        object.__setattr__(self, "categorical", tuple(bool(c) for c in self.categorical))
        if self.continuous_dims < 1:
            raise ValueError("a kernel needs at least one continuous input dimension")
        if len(self.hyper.log_length_scales) != self.n_dims:
            raise ValueError(
                f"{len(self.hyper.log_length_scales)} length-scales for "
                f"{self.n_dims} input dimensions"
            )
        if self.family is KernelFamily.RQ and self.hyper.log_alpha is None:
            raise ValueError("rational quadratic kernel requires log_alpha")
        if self.family is not KernelFamily.RQ and self.hyper.log_alpha is not None:
            raise ValueError(f"{self.family.value} kernel takes no alpha")

    @classmethod
    def default(
        cls,
        family: "KernelFamily | str",
        n_dims: int | None = None,
        categorical: Sequence[bool] | None = None,
        signal_variance: float = 1.0,
        length_scale: "float | Sequence[float]" = 1.0,
        noise_variance: float = 0.01,
        alpha: float = 1.0,
    ) -> "KernelSpec":
        family = KernelFamily.parse(family)
        if categorical is None:
            categorical = (False,) * (n_dims or 1)
        ls = np.broadcast_to(np.asarray(length_scale, dtype=float), (len(categorical),))
        hyper = HyperParams(
            log_signal_variance=math.log(signal_variance),
            log_length_scales=tuple(np.log(ls)),
            log_noise_variance=math.log(noise_variance),
            log_alpha=math.log(alpha) if family is KernelFamily.RQ else None,
        )
        return cls(family, tuple(categorical), hyper)

    @property
    def n_dims(self) -> int:
        return len(self.categorical)

    @property
    def categorical_dims(self) -> int:
        return sum(self.categorical)

    @property
    def continuous_dims(self) -> int:
        return self.n_dims - self.categorical_dims

    @property
    def n_params(self) -> int:
        """Length of the flat parameter vector, noise included."""
        return self.n_dims + 2 + (self.family is KernelFamily.RQ)

    def param_names(self) -> list[str]:
        names = ["log_signal_variance"] + [f"log_length_scale[{d}]" for d in range(self.n_dims)]
        if self.family is KernelFamily.RQ:
            names.append("log_alpha")
        return names + ["log_noise_variance"]

    @property
    def theta(self) -> np.ndarray:
        h = self.hyper
        parts = [h.log_signal_variance, *h.log_length_scales]
        if h.log_alpha is not None:
            parts.append(h.log_alpha)
        parts.append(h.log_noise_variance)
        return np.array(parts, dtype=float)

    def with_theta(self, theta: Sequence[float]) -> "KernelSpec":
        theta = [float(t) for t in theta]
        if len(theta) != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {len(theta)}")
        d = self.n_dims
        hyper = HyperParams(
            log_signal_variance=theta[0],
            log_length_scales=tuple(theta[1 : 1 + d]),
            log_alpha=theta[1 + d] if self.family is KernelFamily.RQ else None,
            log_noise_variance=theta[-1],
        )
        return replace(self, hyper=hyper)

    def with_noise(self, log_noise_variance: float) -> "KernelSpec":
        return replace(self, hyper=replace(self.hyper, log_noise_variance=log_noise_variance))


def _profile(family: KernelFamily, r2: np.ndarray, alpha: float | None) -> np.ndarray:
    if family is KernelFamily.RBF:
        return np.exp(-0.5 * r2)
    if family is KernelFamily.OU:
        return np.exp(-np.sqrt(r2))
    if family is KernelFamily.MATERN32:
        sr = _SQRT3 * np.sqrt(r2)
        return (1.0 + sr) * np.exp(-sr)
    return np.exp(-alpha * np.log1p(r2 / (2.0 * alpha)))


def _profile_slope(family: KernelFamily, r2: np.ndarray, alpha: float | None) -> np.ndarray:
    """``-2 df/d(r^2)``, so that ``dk/dlog l_d = sf2 * c * slope * D_d``."""
    if family is KernelFamily.RBF:
        return np.exp(-0.5 * r2)
    if family is KernelFamily.OU:
        r = np.sqrt(r2)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.exp(-r) / r
        return np.where(r > 0.0, g, 0.0)
    if family is KernelFamily.MATERN32:
        return 3.0 * np.exp(-_SQRT3 * np.sqrt(r2))
    return np.exp(-(alpha + 1.0) * np.log1p(r2 / (2.0 * alpha)))


def _check_X(spec: KernelSpec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.ndim != 2 or X.shape[1] != spec.n_dims:
        raise ValueError(f"inputs have {X.shape[-1]} columns, kernel expects {spec.n_dims}")
    return X


@dataclass
class _Parts:
    r2: np.ndarray  # continuous scaled distance
    cat: np.ndarray  # categorical SE factor
    base: np.ndarray  # f(r2)
    K: np.ndarray


def _parts(spec: KernelSpec, X1: np.ndarray, X2: np.ndarray) -> _Parts:
    cat_mask = np.array(spec.categorical)
    inv_ls = 1.0 / spec.hyper.length_scales
    cont = ~cat_mask
    r2 = _backend.sqdist_ard(X1[:, cont], X2[:, cont], inv_ls[cont])
    if cat_mask.any():
        s2 = _backend.sqdist_ard(X1[:, cat_mask], X2[:, cat_mask], inv_ls[cat_mask])
        cat = np.exp(-0.5 * s2)
    else:
        cat = np.ones_like(r2)
    base = _profile(spec.family, r2, spec.hyper.alpha)
    K = spec.hyper.signal_variance * base * cat
    return _Parts(r2, cat, base, K)


def eval_kernel(spec: KernelSpec, x1, x2) -> float:
    """Evaluate ``k(x1, x2)`` for two single input vectors (scalar route)."""
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x1.size != spec.n_dims or x2.size != spec.n_dims:
        raise ValueError(f"inputs must have {spec.n_dims} entries")
    r2 = 0.0
    s2 = 0.0
    for a, b, log_l, is_cat in zip(x1, x2, spec.hyper.log_length_scales, spec.categorical):
        t = (float(a) - float(b)) * (1.0 / math.exp(log_l))
        if is_cat:
            s2 += t * t
        else:
            r2 += t * t
    fam = spec.family
    if fam is KernelFamily.RBF:
        f = math.exp(-0.5 * r2)
    elif fam is KernelFamily.OU:
        f = math.exp(-math.sqrt(r2))
    elif fam is KernelFamily.MATERN32:
        sr = _SQRT3 * math.sqrt(r2)
        f = (1.0 + sr) * math.exp(-sr)
    else:
        a = spec.hyper.alpha
        f = math.exp(-a * math.log1p(r2 / (2.0 * a)))
    return spec.hyper.signal_variance * f * math.exp(-0.5 * s2)


def kernel_matrix(spec: KernelSpec, X, X2=None) -> np.ndarray:
    """Covariance matrix between the rows of ``X`` (and ``X2`` if given)."""
    X = _check_X(spec, X)
    X2 = X if X2 is None else _check_X(spec, X2)
    return _parts(spec, X, X2).K


def kernel_diag(spec: KernelSpec, X) -> np.ndarray:
    X = _check_X(spec, X)
    return np.full(X.shape[0], spec.hyper.signal_variance)


def kernel_matrix_grad(spec: KernelSpec, X) -> list[np.ndarray]:
    """Derivatives of the noise-free kernel matrix w.r.t. each kernel log-parameter.

    Order follows ``spec.param_names()`` without the trailing noise entry:
    signal variance, one length-scale per column, then alpha for RQ.
    """
    X = _check_X(spec, X)
    p = _parts(spec, X, X)
    h = spec.hyper
    inv_ls = 1.0 / h.length_scales
    slope = h.signal_variance * p.cat * _profile_slope(spec.family, p.r2, h.alpha)
    grads = [p.K.copy()]
    for d, is_cat in enumerate(spec.categorical):
        t = (X[:, d, None] - X[None, :, d]) * inv_ls[d]
        D = t * t
        grads.append((p.K if is_cat else slope) * D)
    if spec.family is KernelFamily.RQ:
        grads.append(p.K * _rq_alpha_factor(p.r2, h.alpha))
    return grads


def _rq_alpha_factor(r2: np.ndarray, alpha: float) -> np.ndarray:
    # d log k / d log alpha
    u = 1.0 + r2 / (2.0 * alpha)
    return -alpha * np.log1p(r2 / (2.0 * alpha)) + r2 / (2.0 * u)


def kernel_parts(spec: KernelSpec, X) -> _Parts:
    """Intermediate quantities of ``kernel_matrix(spec, X)``, reusable for gradients."""
    X = _check_X(spec, X)
    return _parts(spec, X, X)


def contract_kernel_grad(
    spec: KernelSpec, X, W: np.ndarray, parts: _Parts | None = None
) -> np.ndarray:
    """``[sum(W * dK/dtheta_p) for each kernel log-parameter]``.

    Equivalent to contracting ``W`` against every matrix of
    :func:`kernel_matrix_grad`, without materializing them.
    """
    X = _check_X(spec, X)
    p = _parts(spec, X, X) if parts is None else parts
    h = spec.hyper
    inv_ls = 1.0 / h.length_scales
    cat_mask = np.array(spec.categorical)
    out = np.empty(spec.n_params - 1)
    WK = W * p.K
    out[0] = WK.sum()
    slope = h.signal_variance * p.cat * _profile_slope(spec.family, p.r2, h.alpha)
    cont_idx = np.flatnonzero(~cat_mask)
    out[1 + cont_idx] = _backend.ard_contract(X[:, ~cat_mask], inv_ls[~cat_mask], W * slope)
    if cat_mask.any():
        cat_idx = np.flatnonzero(cat_mask)
        out[1 + cat_idx] = _backend.ard_contract(X[:, cat_mask], inv_ls[cat_mask], WK)
    if spec.family is KernelFamily.RQ:
        out[-1] = np.sum(WK * _rq_alpha_factor(p.r2, h.alpha))
    return out
