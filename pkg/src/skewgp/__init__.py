"""Skew processes with exact conjugate posteriors.

Regression, classification, preference, ordinal and mixed observation
models share one posterior family; sampling is rejection-free and the
truncated component is reusable across test points.
"""

__version__ = "0.1.0"

from .acquisition import AcqConfig, bald, dueling_ucb, eiig, safe_ucb
from .errors import InputError, NumericError, SkewGPError
from .kernels import KernelSpec, SkewPriorSpec, build_prior, kernel_matrix
from .likelihoods import (
    ObservationSet,
    OrdinalSpec,
    classification_block,
    merge,
    numeric_block,
    ordinal_block,
    preference_block,
    valid_invalid_block,
)
from .model_selection import FitConfig, objective, optimize
from .mvncdf import (
    CdfRequest,
    Partition,
    block_lower_bound,
    grad_log_mvn_cdf,
    log_mvn_cdf,
    mvn_cdf,
)
from .posterior import (
    FittedModel,
    fit,
    log_marginal_likelihood,
    predict,
    predict_joint,
    sample_latent,
)
from .sun import (
    SampleBatch,
    SunParams,
    skewness_statistic,
    sun_conditional,
    sun_log_pdf,
    sun_marginal,
    sun_sample,
)
from .truncnorm_sampler import (
    LinEssChain,
    TruncSpec,
    feasible_start,
    gelman_rubin,
    liness_sample,
    trunc_second_moment,
)

__all__ = [
    "__version__",
    "AcqConfig", "bald", "dueling_ucb", "eiig", "safe_ucb",
    "InputError", "NumericError", "SkewGPError",
    "KernelSpec", "SkewPriorSpec", "build_prior", "kernel_matrix",
    "ObservationSet", "OrdinalSpec", "classification_block", "merge",
    "numeric_block", "ordinal_block", "preference_block", "valid_invalid_block",
    "FitConfig", "objective", "optimize",
    "CdfRequest", "Partition", "block_lower_bound", "grad_log_mvn_cdf",
    "log_mvn_cdf", "mvn_cdf",
    "FittedModel", "fit", "log_marginal_likelihood", "predict",
    "predict_joint", "sample_latent",
    "SampleBatch", "SunParams", "skewness_statistic", "sun_conditional",
    "sun_log_pdf", "sun_marginal", "sun_sample",
    "LinEssChain", "TruncSpec", "feasible_start", "gelman_rubin",
    "liness_sample", "trunc_second_moment",
]
