"""Plackett-Luce regression for multi-class data.

Sparse MAP estimation by EM, full Bayesian inference by conjugate Gibbs
sampling, a mean-field variational approximation, a sparse Bayesian
multinomial-logit baseline, and the MCMC-efficiency diagnostics needed for
comparative studies.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AugmentedState,
    Dataset,
    FeatureMap,
    PLWeights,
    class_probabilities,
    log_complete_likelihood,
    mixture_weights,
    race_oracle,
    transform,
)
from .rng import RngStream  # noqa: F401
