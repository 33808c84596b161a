"""Bayesian curve clustering with structured within-curve noise.

Clusters functional observations on a shared grid with a Dirichlet or
Pitman-Yor process mixture whose error model can be white noise, a dense
Gaussian-process covariance, its band-truncated approximation, or a fixed
oracle covariance.  Submodules: kernels (covariance construction), blinalg
(banded SPD factorizations), gauss (multivariate normals and seeded
streams), sampler (the collapsed Gibbs chain), summarize (posterior
summaries), metrics (partition scores), simgen (synthetic data), theory
(asymptotic-behavior checks), cli (the study pipeline).
"""

from .blinalg import BandedSPD, CholeskyFactor, NotPositiveDefiniteError, factor_spd
from .gauss import MvnParams, RngStream, log_pdf, sample
from .kernels import (
    Grid,
    KernelSpec,
    band_tail_bound,
    band_truncate,
    build_banded,
    build_covariance,
    select_bandwidth,
)
from .metrics import adjusted_rand_index, purity, rmse_theta
from .sampler import ChainTrace, PartitionPrior, SamplerConfig, run_chain
from .simgen import FunctionalDataset, SimDesign, generate, load_dataset, save_dataset
from .summarize import (
    estimate_cluster_means,
    posterior_mean_k,
    variation_of_information,
    vi_point_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "BandedSPD",
    "ChainTrace",
    "CholeskyFactor",
    "FunctionalDataset",
    "Grid",
    "KernelSpec",
    "MvnParams",
    "NotPositiveDefiniteError",
    "PartitionPrior",
    "RngStream",
    "SamplerConfig",
    "SimDesign",
    "adjusted_rand_index",
    "band_tail_bound",
    "band_truncate",
    "build_banded",
    "build_covariance",
    "estimate_cluster_means",
    "factor_spd",
    "generate",
    "load_dataset",
    "log_pdf",
    "posterior_mean_k",
    "purity",
    "rmse_theta",
    "run_chain",
    "sample",
    "save_dataset",
    "select_bandwidth",
    "variation_of_information",
    "vi_point_estimate",
    "__version__",
]
