import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrgp.gp import (
    FitError,
    ForecastDistribution,
    TrainingSet,
    _cholesky_with_jitter,
    fit,
    initial_draw,
    log_marginal_likelihood,
    log_marginal_likelihood_grad,
    optimize_hyperparams,
    predict,
)
from mrgp.kernels import KernelFamily, KernelSpec, kernel_matrix

import oracles


def spec_for(family, ls, cat, sf2=1.0, sn2=0.01, alpha=1.0):
    return KernelSpec.default(family, categorical=cat, signal_variance=sf2,
                              length_scale=ls, noise_variance=sn2, alpha=alpha)


def ts_for(X, y, cat=None):
    return TrainingSet(X, y, ("feature",) * X.shape[1], cat)


def test_training_set_validation():
    with pytest.raises(ValueError, match="at least 2"):
        TrainingSet(np.zeros((1, 1)), [0.0], ("time",))
    with pytest.raises(ValueError, match="non-finite"):
        TrainingSet(np.array([[0.0], [np.nan]]), [0.0, 1.0], ("time",))
    with pytest.raises(ValueError, match="dim_roles"):
        TrainingSet(np.zeros((2, 2)), [0.0, 1.0], ("time",))
    with pytest.raises(ValueError, match="unknown dim roles"):
        TrainingSet(np.zeros((2, 1)), [0.0, 1.0], ("hour",))
    ts = TrainingSet(np.zeros((2, 1)), [0.0, 1.0], ("time",))
    with pytest.raises(ValueError):
        ts.X[0, 0] = 1.0


def test_forecast_distribution_validation():
    with pytest.raises(ValueError):
        ForecastDistribution([1, 2], [0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        ForecastDistribution([1], [0.0], [-1.0])


def test_fit_matches_dense_oracle_8_points():
    rng = np.random.default_rng(0)
    for family in ("rbf", "ou", "matern32", "rq"):
        X, y, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, family, n=8)
        spec = spec_for(family, ls, cat, sf2, sn2, alpha or 1.0)
        gp = fit(ts_for(X, y, cat), spec)
        _, _, lml, w = oracles.dense_gp(family, X, y, X[:2], sf2, ls, cat, sn2, alpha)
        assert oracles.rel_err(gp.weights, w) < 1e-8
        assert abs(gp.lml - lml) < 1e-8
        A = kernel_matrix(spec, X) + sn2 * np.eye(8)
        assert np.linalg.norm(gp.chol @ gp.chol.T - A) / np.linalg.norm(A) < 1e-8
        assert np.linalg.norm(A @ gp.weights - (y - y.mean())) / np.linalg.norm(y - y.mean()) < 1e-6


def test_predict_matches_dense_oracle():
    rng = np.random.default_rng(1)
    for family in ("rbf", "ou", "matern32", "rq"):
        X, y, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, family, n=8)
        Xs = X[:5] + rng.normal(0, 0.3, size=X[:5].shape)
        spec = spec_for(family, ls, cat, sf2, sn2, alpha or 1.0)
        fd, cov = predict(fit(ts_for(X, y, cat), spec), Xs, full_cov=True)
        mean, cov_ref, _, _ = oracles.dense_gp(family, X, y, Xs, sf2, ls, cat, sn2, alpha)
        assert oracles.rel_err(fd.mean, mean) < 1e-8
        assert np.max(np.abs(cov - cov_ref)) / np.max(np.abs(cov_ref)) < 1e-8
        np.testing.assert_allclose(fd.std ** 2, np.maximum(np.diag(cov_ref), 0), rtol=1e-7, atol=1e-12)


def test_observation_level_adds_noise():
    X = np.linspace(0, 5, 6)[:, None]
    spec = spec_for("rbf", 1.0, (False,), sn2=0.3)
    gp = fit(ts_for(X, np.sin(X[:, 0])), spec)
    a = predict(gp, [[2.5]])
    b = predict(gp, [[2.5]], observation=True)
    assert b.std[0] ** 2 == pytest.approx(a.std[0] ** 2 + 0.3)


def test_duplicate_rows_tiny_noise_fit_via_jitter():
    X = np.array([[1.0], [1.0]])
    gp = fit(ts_for(X, [2.0, 2.0]), spec_for("rbf", 1.0, (False,), sn2=1e-300))
    assert gp.jitter > 0
    assert np.isfinite(gp.lml)


def test_jitter_exhaustion_raises():
    with pytest.raises(np.linalg.LinAlgError):
        _cholesky_with_jitter(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_fit_error_names_hyperparameters(monkeypatch):
    import mrgp.gp as G

    def boom(A):
        raise np.linalg.LinAlgError("not PD")

    monkeypatch.setattr(G, "_cholesky_with_jitter", boom)
    spec = spec_for("ou", 1.0, (False,))
    with pytest.raises(FitError, match="hyperparameters") as info:
        fit(ts_for(np.arange(3.0)[:, None], [0.0, 1.0, 0.0]), spec)
    assert info.value.spec == spec


def test_noiseless_interpolation():
    X = np.linspace(0, 4, 9)[:, None]
    y = np.cos(X[:, 0])
    gp = fit(ts_for(X, y), spec_for("rbf", 0.8, (False,), sn2=1e-10))
    fd = predict(gp, X[3:4])
    assert fd.mean[0] == pytest.approx(y[3], abs=1e-4)
    assert fd.std[0] < 1e-3


def test_prior_reversion_far_from_data():
    X = np.linspace(0, 4, 9)[:, None]
    y = np.cos(X[:, 0]) + 3.0
    spec = spec_for("matern32", 0.8, (False,), sf2=2.0)
    fd = predict(fit(ts_for(X, y), spec), [[1e4]])
    assert fd.mean[0] == pytest.approx(np.mean(y), abs=1e-12)
    assert fd.std[0] == pytest.approx(math.sqrt(2.0), abs=1e-6)


def test_lml_gradient_noise_dominant():
    rng = np.random.default_rng(4)
    X = rng.uniform(0, 3, (10, 1))
    y = rng.standard_normal(10)
    spec = spec_for("rbf", 1.0, (False,), sf2=1.0, sn2=1e6)
    gp = fit(ts_for(X, y), spec)
    g = log_marginal_likelihood_grad(gp)

    def f(t):
        return log_marginal_likelihood(ts_for(X, y), spec.with_theta(t))

    fd = oracles.central_diff(f, spec.theta)
    assert oracles.rel_err(g[-1], fd[-1]) < 1e-4
    yc = y - y.mean()
    # with sn2 >> sf2 the noise gradient approaches (y'y/sn2 - n)/2
    assert g[-1] == pytest.approx(0.5 * (yc @ yc / 1e6 - 10), rel=1e-5)


@pytest.mark.parametrize("family", ["rbf", "ou", "matern32", "rq"])
def test_lml_gradient_finite_difference_10_points(family):
    rng = np.random.default_rng(21)
    for _ in range(4):
        X, y, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, family, n=10)
        spec = spec_for(family, ls, cat, sf2, sn2, alpha or 1.0)
        ts = ts_for(X, y, cat)
        g = log_marginal_likelihood_grad(fit(ts, spec))
        fd = oracles.central_diff(lambda t: log_marginal_likelihood(ts, spec.with_theta(t)), spec.theta)
        assert oracles.rel_err(g, fd, floor=1e-6) < 1e-4


def test_initial_draw_ranges():
    rng = np.random.default_rng(0)
    X = np.c_[np.linspace(0, 10, 20), np.linspace(0, 2, 20)]
    y = np.sin(X[:, 0])
    ts = ts_for(X, y)
    var = np.var(y)
    spec = spec_for("rq", [1, 1], (False, False))
    for _ in range(50):
        t = initial_draw(ts, spec, rng)
        assert math.log(0.1 * var) <= t[0] <= math.log(10 * var)
        assert math.log(1.0) <= t[1] <= math.log(20.0)
        assert math.log(0.2) <= t[2] <= math.log(4.0)
        assert math.log(0.1) <= t[3] <= math.log(10.0)
        assert math.log(1e-4 * var) <= t[4] <= math.log(var)


def test_optimize_recovers_rbf_length_scale():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        X = rng.uniform(0, 10, (60, 1))
        K = kernel_matrix(spec_for("rbf", 1.0, (False,)), X) + 0.01 * np.eye(60)
        y = np.linalg.cholesky(K) @ rng.standard_normal(60)
        gp = optimize_hyperparams(ts_for(X, y), spec_for("rbf", 1.0, (False,)), restarts=3, seed=seed)
        hits += abs(gp.spec.theta[1]) <= 0.5
    assert hits >= 8


def test_optimize_is_deterministic_and_not_worse_than_starts():
    rng = np.random.default_rng(7)
    X = rng.uniform(0, 5, (25, 2))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(25)
    ts = ts_for(X, y)
    spec = spec_for("matern32", [1, 1], (False, False))
    a = optimize_hyperparams(ts, spec, restarts=3, seed=5)
    b = optimize_hyperparams(ts, spec, restarts=3, seed=5)
    assert np.array_equal(a.spec.theta, b.spec.theta) and a.lml == b.lml
    for rec in a.diagnostics["restarts"]:
        assert a.lml >= rec["initial_lml"] - 1e-9
    assert np.max(np.abs(log_marginal_likelihood_grad(a))) < 1e-2


def test_optimize_fixed_point_start():
    rng = np.random.default_rng(8)
    X = rng.uniform(0, 5, (20, 1))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(20)
    ts = ts_for(X, y)
    spec = spec_for("rbf", 1.0, (False,))
    best = optimize_hyperparams(ts, spec, restarts=2, seed=0)
    again = optimize_hyperparams(ts, spec, restarts=1, seed=0, init=best.spec.theta)
    assert again.lml == pytest.approx(best.lml, abs=1e-6)


def test_length_scale_upper_bound_respected():
    rng = np.random.default_rng(2)
    X = np.linspace(0, 10, 30)[:, None]
    y = 0.1 * X[:, 0] + 0.01 * rng.standard_normal(30)
    gp = optimize_hyperparams(ts_for(X, y), spec_for("rbf", 1.0, (False,)), restarts=2,
                              length_scale_upper_bound=2.0)
    assert gp.spec.hyper.length_scales[0] <= 2.0 * (1 + 1e-9)


def test_restarts_must_be_positive():
    ts = ts_for(np.arange(3.0)[:, None], [0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        optimize_hyperparams(ts, spec_for("rbf", 1.0, (False,)), restarts=0)


def test_dimension_mismatch():
    gp = fit(ts_for(np.arange(3.0)[:, None], [0.0, 1.0, 0.0]), spec_for("rbf", 1.0, (False,)))
    with pytest.raises(ValueError, match="columns"):
        predict(gp, np.zeros((2, 2)))


@given(seed=st.integers(0, 2**32 - 1), family=st.sampled_from(["rbf", "ou", "matern32", "rq"]))
def test_posterior_cov_psd_and_bounded(seed, family):
    rng = np.random.default_rng(seed)
    X, y, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, family, n=int(rng.integers(5, 51)))
    Xs = X[rng.integers(0, len(X), 20)] + rng.normal(0, 0.5, (20, X.shape[1]))
    spec = spec_for(family, ls, cat, sf2, sn2, alpha or 1.0)
    fd, cov = predict(fit(ts_for(X, y, cat), spec), Xs, full_cov=True)
    assert np.allclose(cov, cov.T)
    assert np.linalg.eigvalsh(cov + 1e-10 * np.eye(20)).min() > -1e-8
    assert np.all(fd.std ** 2 <= sf2 + 1e-8)


@given(seed=st.integers(0, 2**32 - 1))
def test_duplicate_point_leaves_predictions_unchanged(seed):
    # targets are centered by their mean, so the duplicate shifts the prior
    # level; held-out points sit where the data pin the interpolant
    rng = np.random.default_rng(seed)
    X = (np.linspace(0, 6, 13) + rng.uniform(-0.1, 0.1, 13))[:, None]
    y = np.sin(X[:, 0])
    spec = spec_for("rbf", 1.0, (False,), sn2=1e-10)
    i = int(rng.integers(0, 13))
    Xd = np.vstack([X, X[i:i + 1]])
    yd = np.append(y, y[i])
    Xs = rng.uniform(0.2, 5.8, (4, 1))
    a = predict(fit(ts_for(X, y), spec), Xs).mean
    b = predict(fit(ts_for(Xd, yd), spec), Xs).mean
    assert np.max(np.abs(a - b)) < 1e-3


def test_duplicate_point_shift_is_the_centering_term():
    # away from the data the change is exactly the shift of the target mean
    X = np.array([[0.0], [0.3], [3.0]])
    y = np.array([1.0, 0.5, -1.0])
    spec = spec_for("rbf", 1.0, (False,), sn2=1e-10)
    far = [[50.0]]
    a = predict(fit(ts_for(X, y), spec), far).mean[0]
    b = predict(fit(ts_for(np.vstack([X, X[:1]]), np.append(y, 1.0)), spec), far).mean[0]
    assert b - a == pytest.approx(np.mean(np.append(y, 1.0)) - np.mean(y), abs=1e-12)
