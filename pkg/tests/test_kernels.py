import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrgp.kernels import (
    HyperParams,
    KernelFamily,
    KernelSpec,
    contract_kernel_grad,
    eval_kernel,
    kernel_diag,
    kernel_matrix,
    kernel_matrix_grad,
)

import oracles

FAMILIES = [f.value for f in KernelFamily]


def make_spec(family, ls, cat, sf2=1.0, alpha=1.0, sn2=0.01):
    return KernelSpec.default(family, categorical=cat, signal_variance=sf2,
                              length_scale=ls, noise_variance=sn2, alpha=alpha)


def test_parse_aliases_and_errors():
    assert KernelFamily.parse("SE") is KernelFamily.RBF
    assert KernelFamily.parse("matern12") is KernelFamily.OU
    assert KernelFamily.parse(" RQ ") is KernelFamily.RQ
    with pytest.raises(ValueError, match="unknown kernel family"):
        KernelFamily.parse("matern52")


def test_spec_validation():
    with pytest.raises(ValueError, match="continuous"):
        KernelSpec.default("rbf", categorical=(True, True))
    with pytest.raises(ValueError, match="alpha"):
        KernelSpec("rbf", (False,), HyperParams(0.0, (0.0,), 0.0, log_alpha=0.0))
    with pytest.raises(ValueError, match="requires log_alpha"):
        KernelSpec("rq", (False,), HyperParams(0.0, (0.0,), 0.0))
    with pytest.raises(ValueError, match="length-scales"):
        KernelSpec("ou", (False, False), HyperParams(0.0, (0.0,), 0.0))
    with pytest.raises(ValueError, match="non-finite"):
        HyperParams(math.nan, (0.0,), 0.0)
    with pytest.raises(ValueError, match="non-finite"):
        HyperParams(0.0, (800.0,), 0.0)


@pytest.mark.parametrize("family", FAMILIES)
def test_theta_round_trip(family):
    spec = make_spec(family, [0.5, 2.0, 1.0], (False, False, True), sf2=3.0, alpha=2.0)
    theta = spec.theta
    assert len(theta) == spec.n_params == len(spec.param_names())
    assert spec.with_theta(theta) == spec
    assert theta[-1] == pytest.approx(math.log(0.01))
    with pytest.raises(ValueError):
        spec.with_theta(theta[:-1])


def test_hand_values():
    # r = 1 in every family
    X = np.array([[0.0], [1.0]])
    cases = {
        "rbf": math.exp(-0.5),
        "ou": math.exp(-1.0),
        "matern32": (1 + math.sqrt(3)) * math.exp(-math.sqrt(3)),
        "rq": (1 + 0.5 / 2.0) ** -2.0,
    }
    for fam, want in cases.items():
        K = kernel_matrix(make_spec(fam, 1.0, (False,), alpha=2.0), X)
        assert K[0, 1] == pytest.approx(want, rel=1e-14)
        assert K[0, 0] == 1.0


def test_categorical_factor():
    spec = make_spec("ou", [1.0, 0.5], (False, True), sf2=2.0)
    X = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert kernel_matrix(spec, X)[0, 1] == pytest.approx(2.0 * math.exp(-0.5 * 4.0))


@pytest.mark.parametrize("family", FAMILIES)
def test_matrix_matches_oracle(family):
    rng = np.random.default_rng(11)
    for _ in range(5):
        X, _, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, family)
        X2 = X[::-1] + 0.1
        spec = make_spec(family, ls, cat, sf2, alpha or 1.0, sn2)
        K = kernel_matrix(spec, X, X2)
        ref = oracles.kernel_matrix(family, X, X2, sf2, ls, cat, alpha)
        np.testing.assert_allclose(K, ref, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("family", FAMILIES)
def test_scalar_route_agrees(family):
    rng = np.random.default_rng(5)
    X, _, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, family, n=6)
    spec = make_spec(family, ls, cat, sf2, alpha or 1.0, sn2)
    K = kernel_matrix(spec, X)
    S = np.array([[eval_kernel(spec, a, b) for b in X] for a in X])
    np.testing.assert_allclose(K, S, rtol=1e-13)


@pytest.mark.parametrize("family", FAMILIES)
def test_grad_matches_finite_difference(family):
    rng = np.random.default_rng(3)
    X, _, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, family, n=7)
    spec = make_spec(family, ls, cat, sf2, alpha or 1.0, sn2)
    grads = kernel_matrix_grad(spec, X)
    theta = spec.theta
    assert len(grads) == len(theta) - 1
    for p, G in enumerate(grads):
        def K_at(v, p=p):
            t = theta.copy()
            t[p] = v
            return kernel_matrix(spec.with_theta(t), X)
        h = 1e-5
        fd = (K_at(theta[p] + h) - K_at(theta[p] - h)) / (2 * h)
        err = np.linalg.norm(G - fd) / max(np.linalg.norm(fd), 1e-12)
        assert err < 1e-6, (p, err)


@pytest.mark.parametrize("family", FAMILIES)
def test_contraction_equals_explicit_grads(family):
    rng = np.random.default_rng(9)
    X, _, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, family, n=9)
    spec = make_spec(family, ls, cat, sf2, alpha or 1.0, sn2)
    W = rng.standard_normal((9, 9))
    W = W + W.T
    want = [np.sum(W * G) for G in kernel_matrix_grad(spec, X)]
    np.testing.assert_allclose(contract_kernel_grad(spec, X, W), want, rtol=1e-11, atol=1e-12)


def test_ou_slope_at_zero_distance_is_finite():
    spec = make_spec("ou", 1.0, (False,))
    X = np.array([[0.0], [0.0], [1.0]])
    for G in kernel_matrix_grad(spec, X):
        assert np.isfinite(G).all()
    assert kernel_matrix_grad(spec, X)[1][0, 1] == 0.0


def test_diag_and_shape_errors():
    spec = make_spec("rbf", [1.0, 1.0], (False, False), sf2=2.5)
    np.testing.assert_array_equal(kernel_diag(spec, np.zeros((4, 2))), 2.5)
    with pytest.raises(ValueError):
        kernel_matrix(spec, np.zeros((3, 3)))


@given(
    family=st.sampled_from(FAMILIES),
    seed=st.integers(0, 2**32 - 1),
    log_ls=st.floats(-2, 2),
    log_sf2=st.floats(-3, 3),
)
def test_symmetric_psd_and_bounded(family, seed, log_ls, log_sf2):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-3, 3, size=(12, 2))
    spec = make_spec(family, math.exp(log_ls), (False, False), sf2=math.exp(log_sf2), alpha=1.5)
    K = kernel_matrix(spec, X)
    sf2 = math.exp(log_sf2)
    assert np.array_equal(K, K.T)
    assert np.all(K <= sf2 * (1 + 1e-12)) and np.all(K >= 0)
    assert np.linalg.eigvalsh(K).min() > -1e-9 * sf2


@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-50, 50))
def test_stationary_under_translation(seed, shift):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-3, 3, size=(6, 2))
    spec = make_spec("matern32", [0.7, 1.3], (False, False))
    np.testing.assert_allclose(kernel_matrix(spec, X), kernel_matrix(spec, X + shift),
                               rtol=1e-9, atol=1e-12)


def test_rq_tends_to_rbf_for_large_alpha():
    X = np.linspace(0, 3, 7)[:, None]
    K_rq = kernel_matrix(make_spec("rq", 1.0, (False,), alpha=1e8), X)
    K_rbf = kernel_matrix(make_spec("rbf", 1.0, (False,)), X)
    np.testing.assert_allclose(K_rq, K_rbf, rtol=1e-6)


def test_small_matrices():
    spec = make_spec("matern32", [1.0, 2.0], (False, False), sf2=1.7)
    assert kernel_matrix(spec, np.array([[0.3, 0.1]])).tolist() == [[1.7]]
    np.testing.assert_array_equal(kernel_matrix(spec, np.ones((2, 2))), np.full((2, 2), 1.7))


def test_scalar_examples():
    assert eval_kernel(make_spec("rbf", 1.0, (False,), sf2=2.0), [0.4], [0.4]) == 2.0
    assert eval_kernel(make_spec("ou", 1.0, (False,)), [0.0], [1.0]) == pytest.approx(math.exp(-1), rel=1e-15)


def test_symmetry_of_eval_is_exact():
    rng = np.random.default_rng(12)
    for fam in FAMILIES:
        X, _, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, fam, n=6)
        spec = make_spec(fam, ls, cat, sf2, alpha or 1.0, sn2)
        for a in X:
            for b in X:
                assert eval_kernel(spec, a, b) == eval_kernel(spec, b, a)


def test_grad_wrt_signal_variance_is_kernel():
    rng = np.random.default_rng(2)
    X, _, cat, sf2, ls, sn2, _ = oracles.random_problem(rng, "rbf", n=5)
    spec = make_spec("rbf", ls, cat, sf2, sn2=sn2)
    np.testing.assert_allclose(kernel_matrix_grad(spec, X)[0], kernel_matrix(spec, X), rtol=1e-15)


def test_se_length_scale_grad_at_one_length_scale():
    spec = make_spec("rbf", 1.5, (False,), sf2=2.0)
    G = kernel_matrix_grad(spec, np.array([[0.0], [1.5]]))[1]
    assert G[0, 1] == pytest.approx(2.0 * math.exp(-0.5), rel=1e-14)


@pytest.mark.parametrize("family", FAMILIES)
def test_grad_fd_step_1e6_ten_points(family):
    rng = np.random.default_rng(31)
    for _ in range(3):
        X, _, cat, sf2, ls, sn2, alpha = oracles.random_problem(rng, family, n=10)
        spec = make_spec(family, ls, cat, sf2, alpha or 1.0, sn2)
        theta = spec.theta
        for p, G in enumerate(kernel_matrix_grad(spec, X)):
            lo, hi = theta.copy(), theta.copy()
            lo[p] -= 1e-6
            hi[p] += 1e-6
            fd = (kernel_matrix(spec.with_theta(hi), X) - kernel_matrix(spec.with_theta(lo), X)) / 2e-6
            assert np.linalg.norm(G - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-5


@given(family=st.sampled_from(FAMILIES), seed=st.integers(0, 2**32 - 1), n=st.integers(1, 50))
def test_cholesky_with_tiny_jitter(family, seed, n):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, 3))
    spec = make_spec(family, rng.uniform(0.2, 3, 3), (False, False, False), alpha=1.3)
    np.linalg.cholesky(kernel_matrix(spec, X) + 1e-10 * np.eye(n))


@pytest.mark.parametrize("family", FAMILIES)
def test_ard_degeneracy(family):
    rng = np.random.default_rng(4)
    spec = make_spec(family, [0.8, math.exp(30)], (False, False), alpha=2.0)
    a = rng.uniform(-3, 3, 2)
    b = rng.uniform(-3, 3, 2)
    base = eval_kernel(spec, a, b)
    for v in (-100.0, 0.0, 55.0):
        assert abs(eval_kernel(spec, a, [b[0], v]) - base) < 1e-8


def test_rq_limit_at_alpha_1e6():
    for r in (0.5, 1.0, 2.0, 3.0):
        X = np.array([[0.0], [r]])
        rq = kernel_matrix(make_spec("rq", 1.0, (False,), alpha=1e6), X)[0, 1]
        assert abs(rq - math.exp(-0.5 * r * r)) < 1e-4
