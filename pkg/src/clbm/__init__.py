"""Collapsed Bayesian latent block models.

Joint MCMC inference of the number of row and column clusters and the cluster
memberships of a data matrix, with label-switching correction, posterior
summaries, a variational-EM baseline and a synthetic-data generator.
"""

from .model import (
    BERNOULLI,
    GAUSSIAN,
    AllocationState,
    BlockStats,
    DataMatrix,
    Hyperparams,
    NumericalDegeneracyError,
    log_cluster_count_prior,
    log_marginal_bernoulli,
    log_marginal_gaussian,
    log_posterior,
)
from .sampler import ChainConfig, ChainTrace, MoveSchedule, run_chain
from .relabel import OnlineRelabeler, solve_assignment, sort_for_processing
from .summary import iat, map_estimate, modal_summary, pmp_table
from .bem2 import aic3_parameter_count, aic3_score, bem2_fit, bem2_criterion
from .simulate import SimSpec, generate, transform_theta
from .metrics import adjusted_rand_index

__all__ = [
    "BERNOULLI",
    "GAUSSIAN",
    "AllocationState",
    "BlockStats",
    "ChainConfig",
    "ChainTrace",
    "DataMatrix",
    "Hyperparams",
    "MoveSchedule",
    "NumericalDegeneracyError",
    "OnlineRelabeler",
    "SimSpec",
    "adjusted_rand_index",
    "aic3_parameter_count",
    "aic3_score",
    "bem2_criterion",
    "bem2_fit",
    "generate",
    "iat",
    "log_cluster_count_prior",
    "log_marginal_bernoulli",
    "log_marginal_gaussian",
    "log_posterior",
    "map_estimate",
    "modal_summary",
    "pmp_table",
    "run_chain",
    "solve_assignment",
    "sort_for_processing",
    "transform_theta",
]

__version__ = "0.1.0"
