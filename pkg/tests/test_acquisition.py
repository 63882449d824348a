import numpy as np
import pytest

from skewgp import AcqConfig, InputError, bald, dueling_ucb, eiig, safe_ucb


def test_bald_no_disagreement():
    assert bald(np.full(500, 0.5)) == 0.0
    assert bald(np.full(500, 0.83)) == pytest.approx(0.0, abs=1e-12)


def test_bald_maximal_disagreement():
    eps = 1e-9
    samples = np.array([eps, 1 - eps] * 500)
    assert bald(samples) == pytest.approx(np.log(2), abs=1e-4)


def test_bald_nonnegative_random(rng):
    for _ in range(50):
        p = rng.uniform(0, 1, size=200)
        assert bald(p) >= -1e-12


def test_bald_permutation_invariant(rng):
    p = rng.uniform(0, 1, 300)
    assert bald(p) == pytest.approx(bald(rng.permutation(p)), abs=1e-12)


def test_ucb_full_coverage_is_max(rng):
    d = rng.standard_normal(1000)
    assert dueling_ucb(d, level=0.9999999) == pytest.approx(d.max())


def test_ucb_matches_normal_quantile(rng):
    d = rng.standard_normal(200_000)
    assert dueling_ucb(d, 0.95) == pytest.approx(1.96, abs=0.05)


def test_ucb_translation_equivariance(rng):
    d = rng.standard_normal(5000)
    base = dueling_ucb(d, 0.9)
    assert dueling_ucb(d + 2.5, 0.9) == pytest.approx(base + 2.5, abs=1e-10)


def test_ucb_monotone_when_adding_large_sample(rng):
    d = rng.standard_normal(999)
    base = dueling_ucb(d, 0.95)
    grown = dueling_ucb(np.append(d, base + 5.0), 0.95)
    assert grown >= base - 1e-12


def test_ucb_needs_enough_samples():
    with pytest.raises(InputError):
        dueling_ucb(np.zeros(50), 0.95)


def test_eiig_examples(rng):
    k = 0.1
    assert eiig(np.zeros(500), k, 1.0) == pytest.approx(k * np.log(0.5), abs=1e-9)
    assert eiig(np.full(500, 50.0), k, 1.0) == pytest.approx(0.0, abs=1e-6)
    two_point = np.array([-10.0, 10.0] * 300)
    assert eiig(two_point, k, 1.0) == pytest.approx(
        k * np.log(0.5) - np.log(2), abs=1e-4
    )


def test_safe_ucb_regimes(rng):
    cfg = AcqConfig(kind="safe_ucb", safe_threshold=0.0, safe_prob=0.7,
                    safe_penalty=1000.0)
    high = rng.standard_normal(1000) + 50.0
    assert safe_ucb(high, cfg) == pytest.approx(dueling_ucb(high, 0.95))
    low = rng.standard_normal(1000) - 50.0
    assert safe_ucb(low, cfg) == pytest.approx(dueling_ucb(low, 0.95) - 1000.0)


def test_safe_ucb_boundary_not_penalized():
    cfg = AcqConfig(kind="safe_ucb", safe_threshold=0.0, safe_prob=0.7)
    f = np.concatenate([np.full(700, 1.0), np.full(300, -1.0)])
    assert safe_ucb(f, cfg) == pytest.approx(dueling_ucb(f, 0.95))
    f_below = np.concatenate([np.full(699, 1.0), np.full(301, -1.0)])
    assert safe_ucb(f_below, cfg) == pytest.approx(
        dueling_ucb(f_below, 0.95) - 1000.0
    )


def test_acq_config_validation():
    with pytest.raises(InputError):
        AcqConfig(kind="mystery")
    with pytest.raises(InputError):
        AcqConfig(credible_level=1.5)
    with pytest.raises(InputError):
        AcqConfig(n_samples=10)


def test_acquisitions_permutation_invariant(rng):
    d = rng.standard_normal(2000)
    perm = rng.permutation(d)
    assert dueling_ucb(d, 0.9) == dueling_ucb(perm, 0.9)
    assert eiig(d, 0.1, 1.0) == pytest.approx(eiig(perm, 0.1, 1.0), abs=1e-12)
    cfg = AcqConfig(kind="safe_ucb")
    assert safe_ucb(d, cfg) == safe_ucb(perm, cfg)
