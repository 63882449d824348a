"""Sample-based acquisition functions.

All scores are pure functions of posterior draws; they never query the
model.  Entropies use natural logarithms with probabilities clamped to
[1e-12, 1 - 1e-12].  Credible bounds use the minimum-width empirical
interval: a window of ceil(level * m) consecutive sorted samples, ties
broken toward the lower start index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import InputError

_CLAMP = 1e-12
_KINDS = ("bald", "dueling_ucb", "eiig", "safe_ucb")


@dataclass(frozen=True)
class AcqConfig:
    kind: str = "dueling_ucb"
    credible_level: float = 0.95
    eiig_k: float = 0.1
    safe_threshold: float = 0.0
    safe_prob: float = 0.7
    safe_penalty: float = 1000.0
    n_samples: int = 3000
    noise: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InputError(f"kind must be one of {_KINDS}")
        if not 0.0 < self.credible_level < 1.0:
            raise InputError("credible_level must lie in (0, 1)")
        if self.n_samples < 100:
            raise InputError("n_samples must be >= 100")


def binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=float), _CLAMP, 1.0 - _CLAMP)
    return -p * np.log(p) - (1.0 - p) * np.log(1.0 - p)


def bald(prob_samples: np.ndarray) -> float:
    """Entropy of the mean success probability minus mean entropy."""
    p = np.asarray(prob_samples, dtype=float).ravel()
    if p.size == 0:
        raise InputError("need at least one probability sample")
    return float(binary_entropy(p.mean()) - binary_entropy(p).mean())


def dueling_ucb(diff_samples: np.ndarray, level: float = 0.95) -> float:
    """Upper endpoint of the shortest interval holding ``level`` of the samples."""
    d = np.sort(np.asarray(diff_samples, dtype=float).ravel())
    m = d.size
    if m < 100:
        raise InputError("need at least 100 samples")
    k = int(np.ceil(level * m))
    if k >= m:
        return float(d[-1])
    widths = d[k - 1 :] - d[: m - k + 1]
    i = int(np.argmin(widths))
    return float(d[i + k - 1])


def eiig(diff_samples: np.ndarray, k: float = 0.1, noise: float = 1.0) -> float:
    """Log expected improvement probability (weight k) minus information gain."""
    d = np.asarray(diff_samples, dtype=float).ravel()
    if d.size == 0:
        raise InputError("need at least one sample")
    q = ndtr(d / (np.sqrt(2.0) * noise))
    qbar = float(np.clip(q.mean(), _CLAMP, 1.0 - _CLAMP))
    info_gain = float(binary_entropy(qbar) - binary_entropy(q).mean())
    return k * float(np.log(qbar)) - info_gain


def safe_ucb(f_samples: np.ndarray, config: AcqConfig) -> float:
    """Upper credible bound, penalized when the safety probability is too low.

    The penalty applies when the empirical P[f >= threshold] is strictly
    below ``safe_prob``; a pool sitting exactly at the boundary is not
    penalized.
    """
    f = np.asarray(f_samples, dtype=float).ravel()
    ucb = dueling_ucb(f, config.credible_level)
    p_safe = float(np.mean(f >= config.safe_threshold))
    if p_safe < config.safe_prob:
        ucb -= config.safe_penalty
    return ucb
