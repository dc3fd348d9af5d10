"""Beta priors in mean / scaled-variance form and the full hierarchical prior.

A ``Beta(r, g)`` law has mean ``r`` and variance ``g * r * (1 - r)``, so
``alpha + beta = (1 - g) / g``. Each rate family shares one such prior across
sites; the parent methylation probability ``m_j`` is instead centred on the
stationary density implied by that site's own transmission rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .core import BMode, HyperParams, SiteRates
from .errors import DegenerateRateError, DimensionError, InvalidParameterError

__all__ = [
    "BetaRG",
    "HYPER_SUPPORT",
    "LOG10_G_SUPPORT",
    "alphabeta_to_rg",
    "beta_rg_logpdf",
    "hyperprior_logpdf",
    "log_prior",
    "rg_to_alphabeta",
    "stationary_rm",
]

# Uniform hyperprior supports for the family means.
HYPER_SUPPORT = {
    "mu": (0.0, 1.0),
    "dp": (0.0, 1.0),
    "dd": (0.0, 1.0),
    "c": (0.0, 0.06),
    "b": (0.0, 0.06),
}
LOG10_G_SUPPORT = (-4.0, 0.0)
STATIONARY_TOL = 1e-12


@dataclass(frozen=True)
class BetaRG:
    r: float
    g: float

    def __post_init__(self):
        if not (0.0 < self.r < 1.0 and 0.0 < self.g < 1.0):
            raise InvalidParameterError(
                f"Beta(r={self.r}, g={self.g}) needs r and g strictly inside (0, 1)"
            )

    @property
    def alpha_beta(self) -> tuple[float, float]:
        return rg_to_alphabeta(self)

    @property
    def variance(self) -> float:
        return self.g * self.r * (1.0 - self.r)


def rg_to_alphabeta(rg: BetaRG) -> tuple[float, float]:
    """Convert mean and scaled variance to the usual shape parameters."""
    if not isinstance(rg, BetaRG):
        rg = BetaRG(*rg)
    total = (1.0 - rg.g) / rg.g
    return rg.r * total, (1.0 - rg.r) * total


def alphabeta_to_rg(alpha: float, beta: float) -> BetaRG:
    if alpha <= 0 or beta <= 0:
        raise InvalidParameterError("alpha and beta must be positive")
    return BetaRG(alpha / (alpha + beta), 1.0 / (alpha + beta + 1.0))


def beta_rg_logpdf(x, rg: BetaRG):
    """Normalised beta log-density; ``-inf`` outside the open unit interval.

    Accepts scalar or array ``x``.
    """
    a, b = rg_to_alphabeta(rg)
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xs = np.where(inside, x, 0.5)
    out = (a - 1.0) * np.log(xs) + (b - 1.0) * np.log1p(-xs) - betaln(a, b)
    out = np.where(inside, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def stationary_rm(mu_j, dp_j, dd_j):
    """Parent methylation density left unchanged by one round of replication.

    Raises:
        DegenerateRateError: if ``1 + dp + dd - mu`` is not positive, i.e. the
            process is absorbing (perfect maintenance and no de novo events).
    """
    mu_j, dp_j, dd_j = (np.asarray(v, dtype=float) for v in (mu_j, dp_j, dd_j))
    den = 1.0 + dp_j + dd_j - mu_j
    if np.any(den <= STATIONARY_TOL):
        raise DegenerateRateError(
            "no stationary density: maintenance is perfect and de novo rates are zero"
        )
    out = (dp_j + dd_j) / den
    return float(out) if out.ndim == 0 else out


def _in_open(v, lo, hi):
    return lo < v < hi


def hyperprior_logpdf(hp: HyperParams, families=("mu", "dp", "dd", "c"),
                      with_g_m: bool = True) -> float:
    """Unnormalised uniform hyperprior: 0 inside the support, ``-inf`` outside.

    The ``g`` terms are uniform on the log10 scale, which is the scale the
    sampler moves on, so no Jacobian is added.
    """
    lo_g, hi_g = LOG10_G_SUPPORT
    for fam in families:
        r, g = hp.rg(fam)
        lo, hi = HYPER_SUPPORT[fam]
        if not _in_open(r, lo, hi):
            return -math.inf
        if not _in_open(math.log10(g), lo_g, hi_g):
            return -math.inf
    if with_g_m and not _in_open(math.log10(hp.g_m), lo_g, hi_g):
        return -math.inf
    return 0.0


def prior_families(hp: HyperParams, with_error: bool = True) -> tuple[str, ...]:
    """Rate families that carry a beta prior under the given configuration."""
    fams = ["mu", "dp", "dd"]
    if with_error:
        fams.append("c")
        if hp.b_mode is BMode.HIERARCHICAL:
            fams.append("b")
    return tuple(fams)


_RATE_ATTR = {"mu": "mu", "dp": "delta_p", "dd": "delta_d", "b": "b", "c": "c"}


def log_prior(rates: SiteRates, hp: HyperParams, with_error: bool = True) -> float:
    """Joint log prior density of the site rates and hyperparameters.

    ``m_j`` is scored under ``Beta(stationary_rm(mu_j, dp_j, dd_j), g_m)``,
    recomputed from the supplied rates. With ``with_error=False`` the
    conversion-error families are absent from the model and contribute nothing.
    """
    fams = prior_families(hp, with_error)
    lp = hyperprior_logpdf(hp, fams)
    if lp == -math.inf:
        return lp
    for fam in fams:
        lp += float(np.sum(beta_rg_logpdf(getattr(rates, _RATE_ATTR[fam]), BetaRG(*hp.rg(fam)))))
    try:
        rm = np.atleast_1d(stationary_rm(rates.mu, rates.delta_p, rates.delta_d))
    except DegenerateRateError:
        return -math.inf
    for m_j, rm_j in zip(rates.m, rm):
        if not 0.0 < rm_j < 1.0:
            return -math.inf
        lp += beta_rg_logpdf(m_j, BetaRG(rm_j, hp.g_m))
    return lp


def check_dimensions(rates: SiteRates, n_sites: int):
    if rates.n_sites != n_sites:
        raise DimensionError(f"rates have {rates.n_sites} sites, expected {n_sites}")
