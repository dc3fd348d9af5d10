"""Forward simulation of double-stranded patterns and of methylation density over generations."""

from __future__ import annotations

import numpy as np

from .core import HyperParams, SiteRates
from .hierarchy import BetaRG, rg_to_alphabeta, stationary_rm
from .likelihood import Dataset

__all__ = [
    "draw_site_rates",
    "expected_density_trajectory",
    "iterate_generations",
    "make_rng",
    "simulate_dataset",
]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used for every seeded draw in the package."""
    return np.random.Generator(np.random.Philox(seed))


def _replicate(parent, mu, dp, dd, rng):
    """One replication at every (lineage, site): returns post-replication parent and daughter."""
    u_q = rng.random(parent.shape)
    u_d = rng.random(parent.shape)
    q = np.where(parent == 1, 1, u_q < dp)
    d = np.where(parent == 1, u_d < mu, u_d < dd)
    return q.astype(np.int8), d.astype(np.int8)


def _convert(truth, b, c, rng):
    u = rng.random(truth.shape)
    return np.where(truth == 1, u >= c, u < b).astype(np.int8)


def simulate_dataset(rates: SiteRates, n_patterns: int, seed: int, with_error: bool = True,
                     source: str = "") -> Dataset:
    """Draw ``n_patterns`` independent patterns from the full generative model.

    Each pattern gets its own parent strand, one replication, independent
    bisulfite conversion of both strands and a fair coin for which strand is
    listed first.
    """
    if n_patterns < 1:
        raise ValueError("n_patterns must be at least 1")
    rng = make_rng(seed)
    shape = (n_patterns, rates.n_sites)
    parent = (rng.random(shape) < rates.m).astype(np.int8)
    q, d = _replicate(parent, rates.mu, rates.delta_p, rates.delta_d, rng)
    if with_error:
        q = _convert(q, rates.b, rates.c, rng)
        d = _convert(d, rates.b, rates.c, rng)
    swap = rng.random(n_patterns) < 0.5
    first = np.where(swap[:, None], d, q)
    second = np.where(swap[:, None], q, d)
    return Dataset.from_arrays(first, second, source=source or f"simulated seed={seed}")


def draw_site_rates(hp: HyperParams, n_sites: int, seed: int, with_error: bool = True,
                    max_tries: int = 1000) -> SiteRates:
    """Draw per-site rates from the hierarchy at fixed hyperparameters.

    ``m_j`` is drawn around the stationary density of site j's own rates.
    """
    rng = make_rng(seed)

    def draw(fam):
        a, b = rg_to_alphabeta(BetaRG(*hp.rg(fam)))
        return rng.beta(a, b, size=n_sites)

    mu, dp, dd = draw("mu"), draw("dp"), draw("dd")
    rm = np.atleast_1d(stationary_rm(mu, dp, dd))
    m = np.empty(n_sites)
    for j in range(n_sites):
        a, b = rg_to_alphabeta(BetaRG(rm[j], hp.g_m))
        m[j] = rng.beta(a, b)
    if with_error:
        c = draw("c")
        if hp.b_mode.value == "hierarchical":
            b = draw("b")
        else:
            b = np.full(n_sites, hp.b_value)
    else:
        b = c = np.zeros(n_sites)
    return SiteRates(mu, dp, dd, m, b, c)


def iterate_generations(initial_m, rates: SiteRates, generations: int, population: int,
                        seed: int, follow: str = "random") -> np.ndarray:
    """Methylation density on parent strands across repeated replications.

    A population of independent lineages starts from parent strands drawn at
    ``initial_m``. At every generation each lineage replicates once; with
    ``follow="random"`` the next parent is the post-replication parent or the
    daughter with equal probability (both strands template a daughter cell),
    with ``follow="daughter"`` it is always the daughter. No conversion error
    is applied.

    Returns:
        ``(generations + 1, S)`` array; row 0 is the starting density.
    """
    if generations < 1:
        raise ValueError("generations must be at least 1")
    if follow not in ("random", "daughter"):
        raise ValueError("follow must be 'random' or 'daughter'")
    rng = make_rng(seed)
    s = rates.n_sites
    init = np.broadcast_to(np.asarray(initial_m, dtype=float), (s,))
    strand = (rng.random((population, s)) < init).astype(np.int8)
    out = np.empty((generations + 1, s))
    out[0] = strand.mean(axis=0)
    for t in range(1, generations + 1):
        q, d = _replicate(strand, rates.mu, rates.delta_p, rates.delta_d, rng)
        if follow == "daughter":
            strand = d
        else:
            keep_parent = rng.random((population, 1)) < 0.5
            strand = np.where(keep_parent, q, d)
        out[t] = strand.mean(axis=0)
    return out


def expected_density_trajectory(initial_m, rates: SiteRates, generations: int,
                                follow: str = "random") -> np.ndarray:
    """Exact expected density under the same recursion as ``iterate_generations``."""
    m = np.broadcast_to(np.asarray(initial_m, dtype=float), (rates.n_sites,)).copy()
    mu, dp, dd = rates.mu, rates.delta_p, rates.delta_d
    out = [m.copy()]
    for _ in range(generations):
        daughter = m * mu + (1 - m) * dd
        if follow == "daughter":
            m = daughter
        else:
            parent = m + (1 - m) * dp
            m = 0.5 * (parent + daughter)
        out.append(m.copy())
    return np.array(out)
