"""RBF kernel evaluation and skew-prior construction.

A skew prior is defined by a base kernel, a set of pseudo-points ``U``
and a diagonal +-1 phase matrix ``L``.  With ``Kbar = K / variance``,
the latent blocks are::

    gamma_mat = L Kbar(U, U) L        (s x s)
    delta     = Kbar(X, U) L          (n x s)

so that the assembled block matrix [[gamma_mat, delta^T], [delta,
corr(K(X, X))]] is positive definite for any X.  With ``s = 0`` the
prior is a plain GP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .linalg import jittered_cholesky
from .sun import SunParams


@dataclass(frozen=True)
class KernelSpec:
    """RBF hyperparameters: per-dimension lengthscales, signal and noise variance."""

    lengthscales: np.ndarray
    variance: float
    noise_variance: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if np.any(ls <= 0.0) or not np.all(np.isfinite(ls)):
            raise InputError("lengthscales must be positive and finite")
        if self.variance <= 0.0 or not np.isfinite(self.variance):
            raise InputError("variance must be positive")
        if self.noise_variance < 0.0:
            raise InputError("noise_variance must be nonnegative")

    @property
    def input_dim(self) -> int:
        return self.lengthscales.shape[0]

    def to_dict(self) -> dict:
        return {
            "lengthscales": self.lengthscales.tolist(),
            "variance": float(self.variance),
            "noise_variance": float(self.noise_variance),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(
            lengthscales=np.asarray(d["lengthscales"], dtype=float),
            variance=float(d["variance"]),
            noise_variance=float(d.get("noise_variance", 0.0)),
        )


@dataclass(frozen=True)
class SkewPriorSpec:
    """Skew prior: kernel plus pseudo-points and phase signs.

    ``latent_dim == 0`` (no pseudo-points) gives a pure GP prior.  The
    optional constant mean defaults to zero.
    """

    kernel: KernelSpec
    pseudo_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    phase: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mean_const: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.pseudo_points, dtype=float)
        if u.size == 0:
            u = np.zeros((0, self.kernel.input_dim))
        u = np.atleast_2d(u)
        ph = np.atleast_1d(np.asarray(self.phase, dtype=float))
        if ph.size == 0:
            ph = np.ones(u.shape[0])
        object.__setattr__(self, "pseudo_points", u)
        object.__setattr__(self, "phase", ph)
        if u.shape[0] != ph.shape[0]:
            raise InputError("phase length must equal the number of pseudo-points")
        if u.shape[0] and u.shape[1] != self.kernel.input_dim:
            raise InputError("pseudo-point dimension does not match lengthscales")
        if ph.size and not np.all(np.isin(ph, (-1.0, 1.0))):
            raise InputError("phase entries must be -1 or +1")

    @property
    def latent_dim(self) -> int:
        return self.pseudo_points.shape[0]

    def to_dict(self) -> dict:
        d = self.kernel.to_dict()
        d.update(
            {
                "pseudo_points": self.pseudo_points.tolist(),
                "phase": self.phase.tolist(),
                "latent_dim": self.latent_dim,
            }
        )
        if self.mean_const != 0.0:
            d["mean_const"] = float(self.mean_const)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SkewPriorSpec":
        spec = cls(
            kernel=KernelSpec.from_dict(d),
            pseudo_points=np.asarray(d.get("pseudo_points", []), dtype=float),
            phase=np.asarray(d.get("phase", []), dtype=float),
            mean_const=float(d.get("mean_const", 0.0)),
        )
        if "latent_dim" in d and int(d["latent_dim"]) != spec.latent_dim:
            raise InputError("latent_dim inconsistent with pseudo_points")
        return spec


def _as_inputs(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if d == 1 else x[None, :]
    if x.ndim != 2 or x.shape[1] != d:
        raise InputError(f"inputs must be (n, {d}), got shape {x.shape}")
    return x


def kernel_matrix(spec: KernelSpec, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """RBF cross-covariance: sigma^2 exp(-0.5 sum_k (x1_ik - x2_jk)^2 / l_k^2)."""
    d = spec.input_dim
    x1 = _as_inputs(x1, d) / spec.lengthscales
    x2 = _as_inputs(x2, d) / spec.lengthscales
    sq = (
        np.sum(x1**2, axis=1)[:, None]
        + np.sum(x2**2, axis=1)[None, :]
        - 2.0 * x1 @ x2.T
    )
    return spec.variance * np.exp(-0.5 * np.maximum(sq, 0.0))


def build_prior(spec: SkewPriorSpec, x: np.ndarray) -> SunParams:
    """Finite-dimensional skew prior over the latent function values at ``x``.

    Returns SunParams with zero (or constant) location, scale matrix
    K(X, X), skewness block Kbar(X, U) L and latent parameters
    (zeros, L Kbar(U, U) L).  The assembled positivity block is
    Cholesky-checked before returning.
    """
    k = spec.kernel
    x = _as_inputs(x, k.input_dim)
    n = x.shape[0]
    s = spec.latent_dim
    omega = kernel_matrix(k, x, x)
    xi = np.full(n, spec.mean_const)
    if s == 0:
        params = SunParams(
            xi=xi,
            omega=omega,
            delta=np.zeros((n, 0)),
            gamma=np.zeros(0),
            gamma_mat=np.zeros((0, 0)),
        )
    else:
        u = spec.pseudo_points
        ell = spec.phase
        kbar_xu = kernel_matrix(k, x, u) / k.variance
        kbar_uu = kernel_matrix(k, u, u) / k.variance
        params = SunParams(
            xi=xi,
            omega=omega,
            delta=kbar_xu * ell[None, :],
            gamma=np.zeros(s),
            gamma_mat=ell[:, None] * kbar_uu * ell[None, :],
        )
    # positivity check on [[gamma_mat, delta^T], [delta, corr(omega)]]
    jittered_cholesky(params.positivity_block(), scale=1.0)
    return params
