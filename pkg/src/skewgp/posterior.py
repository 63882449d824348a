"""Exact conjugate posteriors and predictive sampling.

A fitted model is represented as a *latent process*: a recipe for the
mean, covariance and skewness blocks of the posterior at arbitrary
points, together with the shared latent parameters (gamma, gamma_mat).
Conditioning on a probit block extends the latent dimension by the
number of probit rows and leaves mean/covariance untouched; conditioning
on a numeric block updates mean/covariance by the usual Gaussian
formulas and transforms the skewness block.  Mixed observations apply
the probit extension first, then the numeric update.

Because (gamma, gamma_mat) are shared between the training posterior and
every predictive marginal, the truncated-normal component of the
additive sampling representation is drawn once per model and reused for
all test points; the chain extends deterministically when more samples
are requested.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import InputError
from .kernels import SkewPriorSpec, kernel_matrix
from .likelihoods import NumericBlock, ObservationSet, ProbitBlock
from .linalg import (
    chol_solve,
    jittered_cholesky,
    mvn_logpdf,
    split_scale_corr,
)
from .mvncdf import Partition, block_lower_bound, log_mvn_cdf
from .sun import SunParams
from .truncnorm_sampler import LinEssChain, TruncSpec

MODEL_FORMAT_VERSION = 1
_EXACT_CDF_MAX_DIM = 100


class KernelProcess:
    """Latent prior process defined by a skew-prior spec."""

    def __init__(self, spec: SkewPriorSpec):
        self.spec = spec

    @property
    def latent_dim(self) -> int:
        return self.spec.latent_dim

    @property
    def gamma(self) -> np.ndarray:
        return np.zeros(self.spec.latent_dim)

    @property
    def gamma_mat(self) -> np.ndarray:
        s = self.spec.latent_dim
        if s == 0:
            return np.zeros((0, 0))
        k = self.spec.kernel
        u = self.spec.pseudo_points
        ell = self.spec.phase
        kbar = kernel_matrix(k, u, u) / k.variance
        return ell[:, None] * kbar * ell[None, :]

    def mean(self, p: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(p).shape[0], self.spec.mean_const, dtype=float)

    def cov(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return kernel_matrix(self.spec.kernel, p, q)

    def skew(self, p: np.ndarray) -> np.ndarray:
        s = self.spec.latent_dim
        n = np.atleast_2d(p).shape[0]
        if s == 0:
            return np.zeros((n, 0))
        k = self.spec.kernel
        kbar = kernel_matrix(k, p, self.spec.pseudo_points) / k.variance
        return kbar * self.spec.phase[None, :]


class ProbitTilted:
    """Process conditioned on a probit-affine block at the points ``x``."""

    def __init__(self, base, x: np.ndarray, block: ProbitBlock):
        self.base = base
        self.x = np.asarray(x, dtype=float)
        self.block = block
        kxx = base.cov(x, x)
        self._d_x = split_scale_corr(kxx)[0]
        skew_x = base.skew(x)
        w = block.w
        wd = w * self._d_x[None, :]
        self.gamma = np.concatenate([base.gamma, block.z + w @ base.mean(x)])
        self.gamma_mat = np.block(
            [
                [base.gamma_mat, skew_x.T @ wd.T],
                [wd @ skew_x, w @ kxx @ w.T + block.sigma],
            ]
        )

    @property
    def latent_dim(self) -> int:
        return self.gamma.size

    def mean(self, p):
        return self.base.mean(p)

    def cov(self, p, q):
        return self.base.cov(p, q)

    def skew(self, p):
        cov_px = self.base.cov(p, self.x)
        sd_p = np.sqrt(np.maximum(np.diag(self.base.cov(p, p)), 1e-24))
        extra = (cov_px @ self.block.w.T) / sd_p[:, None]
        return np.hstack([self.base.skew(p), extra])


class NumericTilted:
    """Process conditioned on a numeric block at the points ``x``."""

    def __init__(self, base, x: np.ndarray, block: NumericBlock):
        self.base = base
        self.x = np.asarray(x, dtype=float)
        self.block = block
        c = block.c
        kxx = base.cov(x, x)
        self._gram_chol = jittered_cholesky(c @ kxx @ c.T + block.r)
        resid = block.y - c @ base.mean(x)
        self._alpha = chol_solve(self._gram_chol, resid)      # A^-1 (y - C mu)
        d_x, corr_x = split_scale_corr(kxx)
        skew_x = base.skew(x)
        self.gamma = base.gamma + skew_x.T @ (d_x * (c.T @ self._alpha))
        # gamma_mat update: subtract the prior cross term, add it back on
        # the posterior correlation scale
        corr_chol = jittered_cholesky(corr_x, scale=1.0)
        cross_prior = skew_x.T @ chol_solve(corr_chol, skew_x)
        kpost = kxx - kxx @ c.T @ chol_solve(self._gram_chol, c @ kxx)
        d_post, corr_post = split_scale_corr(kpost)
        skew_post = (
            d_x[:, None] * skew_x
            - kxx @ c.T @ chol_solve(self._gram_chol, c @ (d_x[:, None] * skew_x))
        ) / d_post[:, None]
        post_chol = jittered_cholesky(corr_post, scale=1.0)
        cross_post = skew_post.T @ chol_solve(post_chol, skew_post)
        self.gamma_mat = base.gamma_mat - cross_prior + cross_post

    @property
    def latent_dim(self) -> int:
        return self.gamma.size

    def mean(self, p):
        cov_px = self.base.cov(p, self.x)
        return self.base.mean(p) + cov_px @ self.block.c.T @ self._alpha

    def cov(self, p, q):
        c = self.block.c
        cov_px = self.base.cov(p, self.x)
        cov_xq = self.base.cov(self.x, q)
        return self.base.cov(p, q) - cov_px @ c.T @ chol_solve(
            self._gram_chol, c @ cov_xq
        )

    def skew(self, p):
        c = self.block.c
        d_x = split_scale_corr(self.base.cov(self.x, self.x))[0]
        sd_base = np.sqrt(np.maximum(np.diag(self.base.cov(p, p)), 1e-24))
        sd_post = np.sqrt(np.maximum(np.diag(self.cov(p, p)), 1e-24))
        cov_px = self.base.cov(p, self.x)
        scaled_train_skew = d_x[:, None] * self.base.skew(self.x)
        correction = cov_px @ c.T @ chol_solve(self._gram_chol, c @ scaled_train_skew)
        return (sd_base[:, None] * self.base.skew(p) - correction) / sd_post[:, None]


class FittedModel:
    """Posterior process plus the training-set SUN and the reusable chain."""

    def __init__(
        self,
        process,
        prior_process,
        x_train: np.ndarray,
        obs: ObservationSet,
        seed: int = 0,
        prior_spec: SkewPriorSpec | None = None,
    ):
        self.process = process
        self.prior_process = prior_process
        self.x_train = np.asarray(x_train, dtype=float)
        self.obs = obs
        self.seed = seed
        self.prior_spec = prior_spec
        self.posterior_at_train = SunParams(
            xi=process.mean(self.x_train),
            omega=process.cov(self.x_train, self.x_train),
            delta=process.skew(self.x_train),
            gamma=process.gamma,
            gamma_mat=process.gamma_mat,
        )
        self.log_marginal = log_marginal_likelihood(
            self, exact=process.gamma.size <= _EXACT_CDF_MAX_DIM
        )
        self._chain: LinEssChain | None = None
        self._trunc_cache = np.zeros((0, process.gamma.size))
        self._gamma_chol = (
            jittered_cholesky(process.gamma_mat)
            if process.gamma.size
            else np.zeros((0, 0))
        )

    @property
    def latent_dim(self) -> int:
        return self.process.gamma.size

    def trunc_draws(self, m: int) -> np.ndarray:
        """First m rows of the shared truncated component, extending the
        chain deterministically when the cache is too short."""
        if self.latent_dim == 0:
            return np.zeros((m, 0))
        if self._chain is None:
            self._chain = LinEssChain(
                TruncSpec(self.process.gamma, self.process.gamma_mat, seed=self.seed)
            )
        if m > self._trunc_cache.shape[0]:
            extra = self._chain.draw(m - self._trunc_cache.shape[0])
            self._trunc_cache = np.vstack([self._trunc_cache, extra])
        return self._trunc_cache[:m]

    @property
    def chain_state(self) -> tuple[int, int]:
        return (self.seed, 0 if self._chain is None else self._chain.n_steps)

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        if self.prior_spec is None:
            raise InputError("only models fitted from a SkewPriorSpec serialize")
        return {
            "version": MODEL_FORMAT_VERSION,
            "prior": self.prior_spec.to_dict(),
            "x_train": self.x_train.tolist(),
            "observations": self.obs.to_dict(),
            "posterior": self.posterior_at_train.to_dict(),
            "log_marginal": float(self.log_marginal),
            "chain": {"seed": self.seed, "steps": self.chain_state[1]},
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        if int(d.get("version", -1)) != MODEL_FORMAT_VERSION:
            raise InputError(f"unsupported model format version {d.get('version')}")
        spec = SkewPriorSpec.from_dict(d["prior"])
        x = np.asarray(d["x_train"], dtype=float)
        obs = ObservationSet.from_dict(d["observations"])
        model = fit(spec, x, obs, seed=int(d["chain"]["seed"]))
        stored = SunParams.from_dict(d["posterior"])
        if not np.allclose(
            stored.gamma_mat, model.posterior_at_train.gamma_mat, atol=1e-8
        ):
            raise InputError("stored posterior inconsistent with refit")
        steps = int(d["chain"]["steps"])
        if steps > 0 and model.latent_dim > 0:
            burn = TruncSpec(model.process.gamma, model.process.gamma_mat).burn_in
            model.trunc_draws(max(steps - burn, 1))
        return model

    @classmethod
    def load(cls, path) -> "FittedModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit(prior, x: np.ndarray, obs: ObservationSet, seed: int = 0) -> FittedModel:
    """Condition a prior on observations; returns the fitted model.

    ``prior`` is either a SkewPriorSpec or an already-fitted latent
    process (enabling sequential conditioning).  Probit blocks are
    applied before numeric blocks.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if obs.n != x.shape[0]:
        raise InputError("observation set does not match the number of inputs")
    spec = None
    if isinstance(prior, SkewPriorSpec):
        spec = prior
        process = KernelProcess(prior)
    else:
        process = prior
    prior_process = process
    if obs.probit is not None:
        process = ProbitTilted(process, x, obs.probit)
    if obs.numeric is not None:
        process = NumericTilted(process, x, obs.numeric)
    return FittedModel(
        process, prior_process, x, obs, seed=seed, prior_spec=spec
    )


def log_marginal_likelihood(
    model: FittedModel,
    exact: bool = True,
    block_size: int = 70,
    partition_seed: int = 0,
) -> float:
    """Log evidence of the observations under the model's prior process.

    The normal-density factor is always exact (log space).  The CDF
    ratio is exact for latent dimension <= 100; with ``exact=False`` the
    numerator is replaced by the additive block lower bound.
    """
    proc = model.process
    prior = model.prior_process
    total = 0.0
    if model.obs.numeric is not None:
        nb = model.obs.numeric
        mu = prior.mean(model.x_train)
        kxx = prior.cov(model.x_train, model.x_train)
        gram = nb.c @ kxx @ nb.c.T + nb.r
        total += mvn_logpdf(nb.y - nb.c @ mu, gram)
    s_tot = proc.gamma.size
    s_prior = prior.gamma.size
    if s_tot:
        if exact:
            if s_tot > _EXACT_CDF_MAX_DIM:
                raise InputError(
                    f"exact CDF limited to dimension {_EXACT_CDF_MAX_DIM}; "
                    "call with exact=False"
                )
            total += log_mvn_cdf(proc.gamma, proc.gamma_mat)
        else:
            part = Partition.random_balanced(s_tot, block_size, partition_seed)
            bound = block_lower_bound(proc.gamma, proc.gamma_mat, part)
            if bound <= 0.0:
                return -np.inf
            total += float(np.log(bound))
    if s_prior:
        total -= log_mvn_cdf(prior.gamma, prior.gamma_mat)
    return float(total)


def predict(model: FittedModel, xstar: np.ndarray) -> list[SunParams]:
    """Per-test-point predictive SUN marginals (shared latent parameters)."""
    xstar = _as_points(model, xstar)
    proc = model.process
    means = proc.mean(xstar)
    variances = np.diag(proc.cov(xstar, xstar)).copy()
    skews = proc.skew(xstar)
    return [
        SunParams(
            xi=np.array([means[j]]),
            omega=np.array([[variances[j]]]),
            delta=skews[j : j + 1, :],
            gamma=proc.gamma,
            gamma_mat=proc.gamma_mat,
        )
        for j in range(xstar.shape[0])
    ]


def predict_joint(model: FittedModel, xstar: np.ndarray) -> SunParams:
    """Joint predictive SUN over all rows of ``xstar``."""
    xstar = _as_points(model, xstar)
    proc = model.process
    return SunParams(
        xi=proc.mean(xstar),
        omega=proc.cov(xstar, xstar),
        delta=proc.skew(xstar),
        gamma=proc.gamma,
        gamma_mat=proc.gamma_mat,
    )


def sample_latent(
    model: FittedModel,
    xstar: np.ndarray,
    m: int,
    seed: int = 0,
    joint: bool = False,
) -> np.ndarray:
    """m posterior draws of the latent function at the rows of ``xstar``.

    The truncated component is shared: it is drawn once per model and
    reused for every call, so adding test points never re-runs the
    chain.  With ``joint=False`` (default) each column is drawn from its
    exact predictive marginal with a per-point Gaussian residual stream
    keyed by (seed, point coordinates); columns for the same point are
    identical across calls, and evaluating a union of point sets equals
    concatenating the per-set results.  With ``joint=True`` the Gaussian
    residual is drawn jointly (exact joint predictive SUN); use this for
    functionals coupling several points, such as latent differences.
    """
    if m < 1:
        raise InputError("need m >= 1")
    xstar = _as_points(model, xstar)
    q = xstar.shape[0]
    proc = model.process
    trunc = model.trunc_draws(m)
    s_tot = model.latent_dim
    if joint:
        params = predict_joint(model, xstar)
        if s_tot:
            coef = chol_solve(model._gamma_chol, params.delta.T).T
            lin = trunc @ coef.T
            resid_corr = params.omega_corr - coef @ params.delta.T
        else:
            lin = np.zeros((m, q))
            resid_corr = params.omega_corr
        rchol = jittered_cholesky(resid_corr, scale=1.0)
        rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0xA11]))
        r0 = rng.standard_normal((m, q)) @ rchol.T
        return params.xi[None, :] + params.d_omega[None, :] * (r0 + lin)

    # strictly per-point arithmetic so a point's column is bit-identical
    # no matter which batch it appears in
    out = np.empty((m, q))
    for j in range(q):
        pj = xstar[j : j + 1]
        mean_j = float(proc.mean(pj)[0])
        sd_j = np.sqrt(max(float(proc.cov(pj, pj)[0, 0]), 1e-24))
        if s_tot:
            skew_j = proc.skew(pj)[0]
            coef_j = chol_solve(model._gamma_chol, skew_j)
            lin_j = trunc @ coef_j
            resid_var = max(1.0 - float(coef_j @ skew_j), 0.0)
        else:
            lin_j = np.zeros(m)
            resid_var = 1.0
        rng = np.random.default_rng(_point_seed(seed, xstar[j]))
        r0 = rng.standard_normal(m) * np.sqrt(resid_var)
        out[:, j] = mean_j + sd_j * (r0 + lin_j)
    return out


def _point_seed(seed: int, point: np.ndarray) -> np.random.SeedSequence:
    digest = hashlib.sha256(np.ascontiguousarray(point, dtype=float).tobytes()).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.SeedSequence([seed & 0xFFFFFFFF, key])


def _as_points(model: FittedModel, xstar: np.ndarray) -> np.ndarray:
    xstar = np.asarray(xstar, dtype=float)
    d = model.x_train.shape[1]
    if xstar.ndim == 1:
        xstar = xstar[:, None] if d == 1 else xstar[None, :]
    if xstar.ndim != 2 or xstar.shape[1] != d:
        raise InputError(f"test points must be (q, {d})")
    return xstar
