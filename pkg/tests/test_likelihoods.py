import json

import numpy as np
import pytest
from scipy.stats import norm

from skewgp import InputError, OrdinalSpec
from skewgp.likelihoods import (
    classification_block,
    dataset_to_observations,
    load_dataset,
    log_likelihood,
    merge,
    numeric_block,
    ordinal_block,
    preference_block,
    save_dataset,
    valid_invalid_block,
    validate_dataset,
)


def raw_log_likelihood(entries, f, noise, thresholds=None, threshold=0.0):
    """Independent per-observation product of the textbook likelihoods."""
    total = 0.0
    for ob in entries:
        t = ob["type"]
        if t == "num":
            total += norm.logpdf(ob["value"], loc=f[ob["index"]], scale=noise)
        elif t == "class":
            sign = 2 * ob["label"] - 1 if ob["label"] in (0, 1) else ob["label"]
            total += norm.logcdf(sign * f[ob["index"]])
        elif t == "pref":
            total += norm.logcdf((f[ob["winner"]] - f[ob["loser"]]) / noise)
        elif t == "ordinal":
            b = np.concatenate([[-np.inf], thresholds, [np.inf]])
            c = ob["category"]
            total += np.log(
                norm.cdf((b[c] - f[ob["index"]]) / noise)
                - norm.cdf((b[c - 1] - f[ob["index"]]) / noise)
            )
        elif t == "valid":
            if ob["valid"]:
                total += norm.logpdf(ob["value"], loc=f[ob["index"]], scale=noise)
                total += norm.logcdf((f[ob["index"]] - threshold) / noise)
            else:
                total += norm.logcdf((threshold - f[ob["index"]]) / noise)
    return total


def test_numeric_block_indicator_rows():
    obs = numeric_block(3, [(0, 1.5)], 0.5)
    np.testing.assert_allclose(obs.numeric.c, [[1.0, 0.0, 0.0]])
    np.testing.assert_allclose(obs.numeric.r, [[0.25]])


def test_numeric_block_linear_functional():
    obs = numeric_block(3, [(np.array([1.0, 1.0, 0.0]), 2.0)], 1.0)
    np.testing.assert_allclose(obs.numeric.c, [[1.0, 1.0, 0.0]])


def test_numeric_zero_noise_warns_and_jitters():
    with pytest.warns(RuntimeWarning):
        obs = numeric_block(2, [(0, 1.0)], 0.0)
    assert obs.numeric.r[0, 0] == pytest.approx(1e-12)


def test_classification_encodings():
    obs = classification_block(3, np.array([1, 1, 1]))
    np.testing.assert_allclose(obs.probit.w, np.eye(3))
    obs01 = classification_block(2, np.array([0, 1]))
    np.testing.assert_allclose(np.diag(obs01.probit.w), [-1.0, 1.0])
    obs_pm = classification_block(3, np.array([-1, 1, -1]))
    np.testing.assert_allclose(np.diag(obs_pm.probit.w), [-1.0, 1.0, -1.0])
    np.testing.assert_allclose(obs_pm.probit.z, 0.0)
    with pytest.raises(InputError):
        classification_block(2, np.array([0, 2]))


def test_preference_rows():
    obs = preference_block(3, [(0, 1)], 1.0)
    np.testing.assert_allclose(obs.probit.w, [[1.0, -1.0, 0.0]])
    rev = preference_block(3, [(1, 0)], 1.0)
    np.testing.assert_allclose(rev.probit.w, -obs.probit.w)
    halved = preference_block(3, [(0, 1)], 2.0)
    np.testing.assert_allclose(halved.probit.w, 0.5 * obs.probit.w)
    with pytest.raises(InputError):
        preference_block(3, [(1, 1)], 1.0)


def test_ordinal_boundary_row():
    spec = OrdinalSpec(thresholds=np.array([0.0]), noise=1.0)
    obs = ordinal_block(1, np.array([1]), spec)
    np.testing.assert_allclose(obs.probit.z, [0.0])
    np.testing.assert_allclose(obs.probit.w, [[-1.0]])


def test_ordinal_binary_reduces_to_classification():
    spec = OrdinalSpec(thresholds=np.array([0.0]), noise=1.0)
    obs = ordinal_block(2, np.array([1, 2]), spec)
    cls = classification_block(2, np.array([0, 1]))
    np.testing.assert_allclose(obs.probit.w, cls.probit.w)
    np.testing.assert_allclose(obs.probit.z, cls.probit.z)


def test_ordinal_interior_matches_difference_formula():
    spec = OrdinalSpec(thresholds=np.array([-0.5, 0.5]), noise=0.8)
    obs = ordinal_block(1, np.array([2]), spec)
    for f in (-2.0, 0.0, 2.0):
        canon = np.exp(log_likelihood(obs, np.array([f])))
        direct = norm.cdf((0.5 - f) / 0.8) - norm.cdf((-0.5 - f) / 0.8)
        assert canon == pytest.approx(direct, abs=1e-3)
    with pytest.raises(InputError):
        OrdinalSpec(thresholds=np.array([0.5, -0.5]), noise=1.0)


def test_valid_invalid_structure():
    obs = valid_invalid_block(2, [(0, True, 1.0), (1, True, -0.2)], 0.0, 0.5)
    assert obs.m_r == 2 and obs.m_a == 2
    single = valid_invalid_block(1, [(0, False)], 0.0, 1.0)
    assert single.numeric is None
    np.testing.assert_allclose(single.probit.w, [[-1.0]])
    np.testing.assert_allclose(single.probit.z, [0.0])
    with pytest.raises(InputError):
        valid_invalid_block(1, [(0, False, 2.0)], 0.0, 1.0)
    with pytest.raises(InputError):
        valid_invalid_block(1, [(0, True)], 0.0, 1.0)


def test_merge_structure_and_identity():
    num = numeric_block(2, [(0, 1.0)], 0.5)
    prob = classification_block(2, np.array([1, 0]))
    both = merge(num, prob)
    assert both.m_r == 1 and both.m_a == 2
    same = merge(num, None)
    np.testing.assert_allclose(same.numeric.c, num.numeric.c)
    with pytest.raises(InputError):
        merge(num, classification_block(3, np.array([1, 0, 1])))


def test_canonical_translation_is_lossless(rng):
    noise = 0.7
    entries = [
        {"type": "num", "index": 0, "value": 0.4},
        {"type": "num", "index": 2, "value": -1.1},
        {"type": "class", "index": 1, "label": 1},
        {"type": "class", "index": 3, "label": 0},
        {"type": "pref", "winner": 0, "loser": 3},
        {"type": "valid", "index": 2, "valid": True, "value": -1.0},
        {"type": "valid", "index": 1, "valid": False},
    ]
    data = {
        "inputs": [[0.0], [1.0], [2.0], [3.0]],
        "observations": [e for e in entries if e["type"] != "class"]
        + [
            {"type": "class", "index": i, "label": lab}
            for i, lab in enumerate([1, 0, 1, 0])
        ],
        "noise": noise,
        "threshold": 0.0,
    }
    _, obs = dataset_to_observations(data)
    for _ in range(5):
        f = rng.standard_normal(4)
        canon = log_likelihood(obs, f)
        raw = raw_log_likelihood(data["observations"], f, noise)
        assert canon == pytest.approx(raw, abs=2e-3)


def test_canonical_translation_ordinal(rng):
    th = np.array([-0.6, 0.4])
    data = {
        "inputs": [[0.0], [1.0], [2.0]],
        "observations": [
            {"type": "ordinal", "index": 0, "category": 1},
            {"type": "ordinal", "index": 1, "category": 2},
            {"type": "ordinal", "index": 2, "category": 3},
        ],
        "ordinal_spec": {"thresholds": th.tolist(), "noise": 0.9},
    }
    _, obs = dataset_to_observations(data)
    for _ in range(5):
        f = rng.standard_normal(3)
        canon = log_likelihood(obs, f)
        raw = raw_log_likelihood(data["observations"], f, 0.9, thresholds=th)
        assert canon == pytest.approx(raw, abs=1e-3)


def test_dataset_validation_errors(tmp_path):
    with pytest.raises(InputError):
        validate_dataset({"inputs": [[0.0]]})
    with pytest.raises(InputError):
        validate_dataset(
            {"inputs": [[0.0]], "observations": [{"type": "nope"}]}
        )
    with pytest.raises(InputError):
        validate_dataset(
            {"inputs": [[0.0]], "observations": [{"type": "pref", "winner": 0,
                                                  "loser": 3}]}
        )
    good = {
        "inputs": [[0.0], [1.0]],
        "observations": [{"type": "pref", "winner": 0, "loser": 1}],
    }
    path = tmp_path / "d.json"
    save_dataset(good, path)
    loaded = load_dataset(path)
    assert loaded["observations"][0]["winner"] == 0


def test_dataset_round_trip_bytes(tmp_path):
    data = {
        "inputs": [[0.0], [1.5]],
        "observations": [{"type": "num", "index": 1, "value": 2.25}],
        "noise": 0.5,
    }
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_dataset(data, p1)
    save_dataset(json.loads(p1.read_text()), p2)
    assert p1.read_bytes() == p2.read_bytes()
