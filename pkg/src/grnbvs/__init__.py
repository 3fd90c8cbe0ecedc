"""Bayesian variable selection for gene regulatory networks.

Expression data are regressed on TF expression through binary regulation
indicators whose prior combines ChIP-binding and promoter-motif
probabilities with a learned per-TF weight; everything is fitted by Gibbs
sampling.
"""

__version__ = "0.1.0"

from .exceptions import (DegenerateInputError, InternalConsistencyError,  # noqa: E402
                         InvalidInputError, NumericalFailure)
from .model import (Dataset, Hyperparams, ModelParams, NetworkState,  # noqa: E402
                    SparsityStudyResult, compare_prior_forms, prior_probability,
                    prior_probability_arithmetic, prior_sparsity_study,
                    sample_network_from_prior, weight_normalizing_constant_log)
from .sampler import ChainConfig, ChainTrace, run_chain, run_chains  # noqa: E402
from .summary import PosteriorSummary, summarize  # noqa: E402
from .diagnostics import convergence_report  # noqa: E402
from .synth import SynthSpec, generate_synthetic  # noqa: E402

__all__ = [
    "ChainConfig", "ChainTrace", "Dataset", "DegenerateInputError", "Hyperparams",
    "InternalConsistencyError", "InvalidInputError", "ModelParams", "NetworkState",
    "NumericalFailure", "PosteriorSummary", "SparsityStudyResult", "SynthSpec",
    "compare_prior_forms", "convergence_report", "generate_synthetic", "prior_probability",
    "prior_probability_arithmetic", "prior_sparsity_study", "run_chain", "run_chains",
    "sample_network_from_prior", "summarize", "weight_normalizing_constant_log",
]
