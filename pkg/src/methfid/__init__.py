"""Bayesian inference of DNA methylation transmission fidelity from hairpin patterns.

The package models double-stranded methylation patterns observed without
strand identity, with bisulfite conversion error, per-site rate variation
through beta hierarchies and a prior on methylation density centred on its
stationary value.
"""

from .core import (
    BMode,
    HyperParams,
    LatentTriple,
    MethylationPattern,
    SiteRates,
    error_prob,
    event_prob,
    single_site_joint,
    site_joint_table,
)
from .hierarchy import BetaRG, beta_rg_logpdf, log_prior, rg_to_alphabeta, stationary_rm
from .likelihood import Dataset, LikelihoodCache, dataset_loglik, ordered_loglik, pattern_loglik

__version__ = "0.1.0"
