"""Metropolis-within-Gibbs sampling of the hierarchical transmission model."""

from .chain import (
    ChainConfig,
    ModelState,
    adapt_step_sizes,
    audit_state,
    hyper_balance,
    joint_balance,
    initial_state,
    log_posterior,
    metropolis_balance,
    run_chain,
    run_single_chain,
    sweep,
)

__all__ = [
    "ChainConfig",
    "ModelState",
    "adapt_step_sizes",
    "audit_state",
    "hyper_balance",
    "joint_balance",
    "initial_state",
    "log_posterior",
    "metropolis_balance",
    "run_chain",
    "run_single_chain",
    "sweep",
]
