import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import multivariate_normal, norm

from conftest import random_sun_params
from skewgp import InputError
from skewgp.sun import (
    SunParams,
    skewness_statistic,
    sun_conditional,
    sun_log_pdf,
    sun_marginal,
    sun_sample,
)


def pdf1(params, z):
    return np.exp(sun_log_pdf(params, np.array([z])))


def test_zero_delta_is_normal(rng):
    omega = np.array([[2.0, 0.4], [0.4, 1.0]])
    params = SunParams(
        xi=np.array([0.5, -1.0]), omega=omega, delta=np.zeros((2, 1)),
        gamma=np.array([0.3]), gamma_mat=np.array([[1.0]]),
    )
    for _ in range(5):
        z = rng.standard_normal(2)
        ref = multivariate_normal(mean=params.xi, cov=omega).logpdf(z)
        assert sun_log_pdf(params, z) == pytest.approx(ref, abs=1e-7)


def test_scalar_example_value():
    params = SunParams(
        xi=np.zeros(1), omega=np.eye(1), delta=np.array([[0.7]]),
        gamma=np.zeros(1), gamma_mat=np.eye(1),
    )
    assert sun_log_pdf(params, np.zeros(1)) == pytest.approx(
        np.log(norm.pdf(0.0)), abs=1e-7
    )


def test_s0_is_exactly_normal(rng):
    params = SunParams(
        xi=np.array([1.0]), omega=np.array([[4.0]]), delta=np.zeros((1, 0)),
        gamma=np.zeros(0), gamma_mat=np.zeros((0, 0)),
    )
    for z in (-2.0, 0.0, 3.5):
        assert sun_log_pdf(params, np.array([z])) == pytest.approx(
            norm(1.0, 2.0).logpdf(z), abs=1e-7
        )


@pytest.mark.parametrize("s", [1, 2])
def test_univariate_normalization(rng, s):
    params = random_sun_params(rng, p=1, s=s)
    sd = np.sqrt(params.omega[0, 0])
    lo, hi = params.xi[0] - 10 * sd, params.xi[0] + 10 * sd
    total = quad(lambda z: pdf1(params, z), lo, hi, limit=300)[0]
    assert total == pytest.approx(1.0, abs=1e-4)


def test_marginal_full_keep_is_identity(rng):
    params = random_sun_params(rng, p=3, s=1)
    marg = sun_marginal(params, [0, 1, 2])
    np.testing.assert_allclose(marg.omega, params.omega)
    np.testing.assert_allclose(marg.delta, params.delta)


def test_marginal_zero_delta_is_gaussian_submatrix(rng):
    params = SunParams(
        xi=np.array([0.0, 1.0, 2.0]),
        omega=np.diag([1.0, 2.0, 3.0]) + 0.2,
        delta=np.zeros((3, 1)),
        gamma=np.zeros(1),
        gamma_mat=np.eye(1),
    )
    marg = sun_marginal(params, [0, 2])
    np.testing.assert_allclose(marg.omega, params.omega[np.ix_([0, 2], [0, 2])])


def test_marginal_matches_quadrature(rng):
    params = random_sun_params(rng, p=2, s=1)
    marg = sun_marginal(params, [0])
    sd = np.sqrt(params.omega[1, 1])
    for z0 in (-0.8, 0.1, 1.2):
        direct = pdf1(marg, z0)
        integrated = quad(
            lambda z1: np.exp(sun_log_pdf(params, np.array([z0, z1]))),
            params.xi[1] - 10 * sd, params.xi[1] + 10 * sd, limit=300,
        )[0]
        assert direct == pytest.approx(integrated, abs=1e-4)


def test_marginal_input_validation(rng):
    params = random_sun_params(rng, p=2, s=1)
    with pytest.raises(InputError):
        sun_marginal(params, [])
    with pytest.raises(InputError):
        sun_marginal(params, [5])


def test_conditional_zero_delta_is_gaussian(rng):
    omega = np.array([[2.0, 0.7], [0.7, 1.5]])
    params = SunParams(
        xi=np.array([0.2, -0.4]), omega=omega, delta=np.zeros((2, 1)),
        gamma=np.zeros(1), gamma_mat=np.eye(1),
    )
    cond = sun_conditional(params, [0], np.array([1.0]))
    mean_ref = -0.4 + 0.7 / 2.0 * (1.0 - 0.2)
    var_ref = 1.5 - 0.7**2 / 2.0
    assert cond.xi[0] == pytest.approx(mean_ref, abs=1e-7)
    assert cond.omega[0, 0] == pytest.approx(var_ref, abs=1e-7)


def test_conditional_is_joint_over_marginal(rng):
    params = random_sun_params(rng, p=2, s=2)
    z0 = 0.4
    cond = sun_conditional(params, [0], np.array([z0]))
    marg = sun_marginal(params, [0])
    denom = pdf1(marg, z0)
    for z1 in (-1.0, 0.0, 0.9):
        lhs = pdf1(cond, z1)
        rhs = np.exp(sun_log_pdf(params, np.array([z0, z1]))) / denom
        assert lhs == pytest.approx(rhs, rel=1e-6)


def test_condition_then_marginalize_commutes(rng):
    params = random_sun_params(rng, p=3, s=1)
    z0 = -0.3
    # path A: condition z0, then marginalize to the former coordinate 2
    cond = sun_conditional(params, [0], np.array([z0]))
    path_a = sun_marginal(cond, [1])
    # path B: marginalize the joint to (0, 2), then condition on z0
    joint02 = sun_marginal(params, [0, 2])
    path_b = sun_conditional(joint02, [0], np.array([z0]))
    for z in (-1.5, 0.0, 0.7, 2.0):
        assert pdf1(path_a, z) == pytest.approx(pdf1(path_b, z), abs=1e-4)


def test_conditional_latent_shift_hand_computed():
    # p=2, s=1, unit variances: shift is delta_1 * (z - xi_1)
    delta = np.array([[0.6], [0.2]])
    omega = np.array([[1.0, 0.3], [0.3, 1.0]])
    params = SunParams(
        xi=np.zeros(2), omega=omega, delta=delta,
        gamma=np.array([0.1]), gamma_mat=np.array([[1.0]]),
    )
    cond = sun_conditional(params, [0], np.array([0.8]))
    assert cond.gamma[0] == pytest.approx(0.1 + 0.6 * 0.8, abs=1e-7)
    assert cond.gamma_mat[0, 0] == pytest.approx(1.0 - 0.36, abs=1e-7)


def test_sampling_zero_delta_normal_moments():
    params = SunParams(
        xi=np.array([1.0, -1.0]),
        omega=np.array([[2.0, 0.5], [0.5, 1.0]]),
        delta=np.zeros((2, 1)),
        gamma=np.zeros(1),
        gamma_mat=np.eye(1),
    )
    vals = sun_sample(params, 100_000, seed=4).values
    se = np.sqrt(np.diag(params.omega) / vals.shape[0])
    assert np.all(np.abs(vals.mean(axis=0) - params.xi) < 3 * se)
    assert np.abs(np.cov(vals.T) - params.omega).max() < 0.05


def test_sampling_mean_matches_quadrature(rng):
    params = SunParams(
        xi=np.zeros(1), omega=np.eye(1), delta=np.array([[0.7]]),
        gamma=np.zeros(1), gamma_mat=np.eye(1),
    )
    mean_quad = quad(lambda z: z * pdf1(params, z), -10, 10, limit=300)[0]
    vals = sun_sample(params, 100_000, seed=5).values
    se = vals.std() / np.sqrt(vals.size)
    assert abs(vals.mean() - mean_quad) < 4 * se


def test_sampling_determinism_and_reuse():
    rng = np.random.default_rng(0)
    params = random_sun_params(rng, p=2, s=2)
    a = sun_sample(params, 400, seed=7)
    b = sun_sample(params, 400, seed=7)
    np.testing.assert_array_equal(a.values, b.values)
    c = sun_sample(params, 400, seed=21, reuse=a.trunc_draws)
    d = sun_sample(params, 400, seed=21, reuse=a.trunc_draws)
    np.testing.assert_array_equal(c.values, d.values)
    np.testing.assert_array_equal(c.trunc_draws, a.trunc_draws)
    with pytest.raises(InputError):
        sun_sample(params, 300, seed=1, reuse=a.trunc_draws)


def test_trunc_draws_satisfy_constraint(rng):
    params = random_sun_params(rng, p=1, s=2)
    batch = sun_sample(params, 5000, seed=9)
    assert np.all(batch.trunc_draws + params.gamma > 0)


def test_skewness_examples():
    assert skewness_statistic(np.array([-1.0, 0.0, 1.0])) == 0.0
    rng = np.random.default_rng(1)
    assert abs(skewness_statistic(rng.standard_normal(100_000))) < 0.05
    half = np.abs(rng.standard_normal(100_000))
    expected = np.sqrt(2) * (4 - np.pi) / (np.pi - 2) ** 1.5
    assert skewness_statistic(half) == pytest.approx(expected, abs=0.05)
    with pytest.warns(RuntimeWarning):
        assert skewness_statistic(np.ones(5)) == 0.0


def test_params_serialization_round_trip(rng):
    params = random_sun_params(rng, p=3, s=2)
    back = SunParams.from_dict(params.to_dict())
    np.testing.assert_allclose(back.omega, params.omega)
    np.testing.assert_allclose(back.delta, params.delta)
    np.testing.assert_allclose(back.gamma_mat, params.gamma_mat)
