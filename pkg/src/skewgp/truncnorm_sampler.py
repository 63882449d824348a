"""Rejection-free sampling from linearly truncated multivariate normals.

The target is x ~ N(0, gamma_mat) restricted to the shifted orthant
``x + gamma > 0`` (componentwise).  Each Markov step draws an auxiliary
normal ``nu`` and moves along the ellipse ``x cos(t) + nu sin(t)``; the
feasible angle set is an intersection of arcs that is computed in closed
form, so proposals are never rejected.  When rounding makes the analytic
arc set degenerate, a shrinking-bracket slice step on the same ellipse is
used as a fallback.

Chains are plain Python objects: single-threaded, explicitly seeded, and
they expose (seed, step count) so runs can be reproduced or extended
deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError
from .linalg import jittered_cholesky
from .mvncdf import log_mvn_cdf, trunc_second_moment

_TWO_PI = 2.0 * np.pi
_FEASIBLE_MARGIN = 1e-6
_MIN_REGION_LOG_PROB = np.log(1e-300)
_REGION_CHECK_MAX_DIM = 100


@dataclass(frozen=True)
class TruncSpec:
    """Truncated-normal target: N(0, gamma_mat) on {x : x + gamma > 0}."""

    gamma: np.ndarray
    gamma_mat: np.ndarray
    burn_in: int = 100
    seed: int = 0

    def __post_init__(self):
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        gmat = np.atleast_2d(np.asarray(self.gamma_mat, dtype=float))
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "gamma_mat", gmat)
        if gmat.shape != (gamma.size, gamma.size):
            raise InputError("gamma_mat must be (s, s) matching gamma")
        if self.burn_in < 0:
            raise InputError("burn_in must be >= 0")

    @property
    def dim(self) -> int:
        return self.gamma.size


def feasible_start(spec: TruncSpec) -> np.ndarray:
    """A strictly feasible point: coordinatewise max(-gamma_i + 1, 1)."""
    x0 = np.maximum(-spec.gamma + 1.0, 1.0)
    if np.any(x0 + spec.gamma < _FEASIBLE_MARGIN):
        raise InputError("could not construct a feasible starting point")
    return x0


def _merge_intervals(starts: np.ndarray, ends: np.ndarray):
    """Union of [start, end] intervals; inputs need not be sorted."""
    order = np.argsort(starts, kind="stable")
    s = starts[order]
    e = ends[order]
    cmax = np.maximum.accumulate(e)
    new_group = np.ones(s.size, dtype=bool)
    new_group[1:] = s[1:] > cmax[:-1]
    group_start = np.flatnonzero(new_group)
    merged_s = s[group_start]
    merged_e = np.maximum.reduceat(e, group_start)
    return merged_s, merged_e


class LinEssChain:
    """Markov chain on the truncated normal; state persists across draws."""

    def __init__(self, spec: TruncSpec):
        self.spec = spec
        s = spec.dim
        self._chol = jittered_cholesky(spec.gamma_mat) if s else np.zeros((0, 0))
        if 0 < s <= _REGION_CHECK_MAX_DIM:
            # region mass check: P(x > -gamma) = Phi_s(gamma; gamma_mat)
            logp = log_mvn_cdf(spec.gamma, spec.gamma_mat)
            if logp <= _MIN_REGION_LOG_PROB:
                raise InputError(
                    f"truncation region has vanishing probability (log {logp:.1f})"
                )
        self._x = feasible_start(spec) if s else np.zeros(0)
        self._rng = np.random.default_rng(spec.seed)
        self.n_steps = 0
        self.n_fallback_steps = 0
        self.n_ellipses = 0
        self._burned = False

    @property
    def state(self) -> tuple[int, int]:
        """(seed, total step count) for reproducibility logging."""
        return (self.spec.seed, self.n_steps)

    def _fallback_step(self, x: np.ndarray, nu: np.ndarray) -> np.ndarray:
        # shrinking bracket around the (always feasible) current angle 0
        gamma = self.spec.gamma
        theta = self._rng.uniform(0.0, _TWO_PI)
        tmin, tmax = theta - _TWO_PI, theta
        for _ in range(1000):
            prop = x * np.cos(theta) + nu * np.sin(theta)
            if np.all(prop + gamma > 0.0):
                return prop
            if theta < 0.0:
                tmin = theta
            else:
                tmax = theta
            theta = self._rng.uniform(tmin, tmax)
        return x

    def _step(self) -> np.ndarray:
        spec = self.spec
        x = self._x
        nu = self._chol @ self._rng.standard_normal(spec.dim)
        self.n_ellipses += 1
        r = np.hypot(x, nu)
        active = r > spec.gamma
        if not np.any(active):
            theta = self._rng.uniform(0.0, _TWO_PI)
            prop = x * np.cos(theta) + nu * np.sin(theta)
        else:
            mid = np.arctan2(nu[active], x[active])
            half = np.arccos(np.clip(-spec.gamma[active] / r[active], -1.0, 1.0))
            # forbidden arc per active constraint: [mid+half, mid+2pi-half]
            starts = np.mod(mid + half, _TWO_PI)
            lengths = _TWO_PI - 2.0 * half
            ends = starts + lengths
            wrap = ends > _TWO_PI
            if np.any(wrap):
                starts = np.concatenate([starts, np.zeros(np.sum(wrap))])
                new_ends = np.concatenate([ends, ends[wrap] - _TWO_PI])
                new_ends[np.flatnonzero(wrap)] = _TWO_PI
                ends = new_ends
            fs, fe = _merge_intervals(starts, ends)
            # allowed angles: complement of the forbidden union in [0, 2pi)
            gap_s = np.concatenate([[0.0], fe])
            gap_e = np.concatenate([fs, [_TWO_PI]])
            keep = gap_e - gap_s > 1e-14
            gap_s, gap_e = gap_s[keep], gap_e[keep]
            total = float(np.sum(gap_e - gap_s))
            if total <= 1e-12:
                prop = self._fallback_step(x, nu)
                self.n_fallback_steps += 1
                self._x = prop
                self.n_steps += 1
                return prop
            u = self._rng.uniform(0.0, total)
            cum = np.cumsum(gap_e - gap_s)
            j = int(np.searchsorted(cum, u, side="right"))
            theta = gap_s[j] + (u - (cum[j - 1] if j else 0.0))
            prop = x * np.cos(theta) + nu * np.sin(theta)
        if not np.all(prop + spec.gamma > 0.0):
            prop = self._fallback_step(x, nu)
            self.n_fallback_steps += 1
        self._x = prop
        self.n_steps += 1
        return prop

    def draw(self, m: int) -> np.ndarray:
        """Advance the chain and return the next m states (post burn-in)."""
        if m < 1:
            raise InputError("need m >= 1")
        s = self.spec.dim
        if s == 0:
            return np.zeros((m, 0))
        if not self._burned:
            for _ in range(self.spec.burn_in):
                self._step()
            self._burned = True
        out = np.empty((m, s))
        for i in range(m):
            out[i] = self._step()
        return out


def liness_sample(
    spec: TruncSpec, m: int, chain: LinEssChain | None = None
) -> np.ndarray:
    """m draws from the truncated normal; pass ``chain`` to continue one."""
    if chain is None:
        chain = LinEssChain(spec)
    return chain.draw(m)


def gelman_rubin(chains: np.ndarray) -> np.ndarray:
    """Per-coordinate R-hat for an (n_chains, n_steps, dim) array of draws."""
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 3 or chains.shape[0] < 2 or chains.shape[1] < 2:
        raise InputError("need (n_chains >= 2, n_steps >= 2, dim) draws")
    n = chains.shape[1]
    chain_means = chains.mean(axis=1)
    w = chains.var(axis=1, ddof=1).mean(axis=0)
    b_over_n = chain_means.var(axis=0, ddof=1)
    var_hat = (n - 1) / n * w + b_over_n
    return np.sqrt(var_hat / np.maximum(w, 1e-300))


__all__ = [
    "TruncSpec",
    "LinEssChain",
    "feasible_start",
    "liness_sample",
    "trunc_second_moment",
    "gelman_rubin",
]
