import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_sun_params(rng, p, s, scale=1.0):
    """A valid random SUN parameter set (positivity block checked)."""
    from skewgp.sun import SunParams

    a = rng.standard_normal((p + s, p + s))
    big = a @ a.T + (p + s) * np.eye(p + s)
    d = np.sqrt(np.diag(big))
    big = big / d[:, None] / d[None, :]
    omega_scale = rng.uniform(0.5, scale + 1.0, size=p)
    params = SunParams(
        xi=rng.uniform(-1.0, 1.0, size=p),
        omega=big[s:, s:] * omega_scale[:, None] * omega_scale[None, :],
        delta=big[s:, :s],
        gamma=rng.uniform(-0.5, 0.5, size=s),
        gamma_mat=big[:s, :s],
    )
    return params.validate()


def weighted_mean_se(values, weights):
    """Self-normalized importance-sampling estimate and its standard error."""
    w = np.asarray(weights, dtype=float)
    v = np.asarray(values, dtype=float)
    wbar = w.mean()
    est = float(np.sum(v * w) / np.sum(w))
    resid = w * (v - est)
    se = float(np.std(resid, ddof=1) / (np.sqrt(w.size) * wbar))
    return est, se


def blocked_se(draws, n_blocks=20):
    """Standard error of the mean for (possibly autocorrelated) draws."""
    draws = np.asarray(draws, dtype=float).ravel()
    blocks = np.array_split(draws, n_blocks)
    means = np.array([b.mean() for b in blocks])
    return float(np.std(means, ddof=1) / np.sqrt(n_blocks))
