"""Pooling, credible intervals and plot data for MCMC output."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "FamilySummary",
    "PosteriorSamples",
    "Scatter",
    "autocorrelation",
    "credible_interval",
    "family_summary",
    "hyper_names",
    "joint_scatter",
    "site_intervals",
    "split_rhat",
    "summarize",
    "variability_label",
]

SITE_FAMILIES = ("mu", "dp", "dd", "m", "c", "b")
HYPER_NAMES = ("r_mu", "g_mu", "r_dp", "g_dp", "r_dd", "g_dd", "r_b", "g_b", "r_c", "g_c", "g_m")


def hyper_names() -> tuple[str, ...]:
    return HYPER_NAMES


class PosteriorSamples:
    """Retained draws from one or more chains.

    Attributes:
        draws: (n_draws, n_params) matrix.
        names: column labels, e.g. ``mu.1`` ... ``mu.S``, ``r_mu``, ``g_mu``, ``logpost``.
        chain_ids: chain index of every row.
        config: echo of the run configuration.
        traces: per-chain log-posterior at every iteration, when available.
        acceptance: per-chain acceptance rates by block, when available.
    """

    def __init__(self, draws, names: Sequence[str], chain_ids=None, config=None,
                 traces=None, acceptance=None, meta=None):
        draws = np.asarray(draws, dtype=float)
        if draws.ndim != 2 or draws.shape[1] != len(names):
            raise ValueError("draws must be (n_draws, len(names))")
        self.draws = draws
        self.names = list(names)
        self._index = {n: i for i, n in enumerate(self.names)}
        if chain_ids is None:
            chain_ids = np.zeros(draws.shape[0], dtype=int)
        self.chain_ids = np.asarray(chain_ids, dtype=int)
        self.config = dict(config or {})
        self.traces = dict(traces or {})
        self.acceptance = dict(acceptance or {})
        self.meta = dict(meta or {})

    def __len__(self):
        return self.draws.shape[0]

    def __contains__(self, name):
        return name in self._index

    def __repr__(self):
        return (f"PosteriorSamples(n_draws={len(self)}, n_params={len(self.names)}, "
                f"chains={self.chains()})")

    @property
    def n_sites(self) -> int:
        return sum(1 for n in self.names if n.startswith("mu."))

    def chains(self) -> list[int]:
        return sorted(set(self.chain_ids.tolist()))

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self._index[name]]

    def site_matrix(self, family: str) -> np.ndarray:
        """(n_draws, S) block of one site-level family."""
        cols = [self._index[n] for n in self.names if n.startswith(f"{family}.")]
        if not cols:
            raise KeyError(f"no site-level columns for {family!r}")
        return self.draws[:, cols]

    def series(self, expr: str) -> np.ndarray:
        """Resolve a parameter name or a small derived expression to a per-draw series.

        Supported: any column name; ``1-NAME``; ``log10.NAME``;
        ``median.FAMILY`` (median across sites, FAMILY may be ``1-mu`` or
        ``denovo`` for the mean of the two de novo rates).
        """
        if expr in self._index:
            return self.column(expr)
        if expr.startswith("1-"):
            return 1.0 - self.series(expr[2:])
        if expr.startswith("log10."):
            return np.log10(self.series(expr[6:]))
        m = re.fullmatch(r"median\.(.+)", expr)
        if m:
            fam = m.group(1)
            if fam == "denovo":
                block = 0.5 * (self.site_matrix("dp") + self.site_matrix("dd"))
            elif fam.startswith("1-"):
                block = 1.0 - self.site_matrix(fam[2:])
            else:
                block = self.site_matrix(fam)
            return np.median(block, axis=1)
        raise KeyError(f"unknown parameter or expression {expr!r}")

    def select_chain(self, chain: int) -> "PosteriorSamples":
        keep = self.chain_ids == chain
        return PosteriorSamples(
            self.draws[keep], self.names, self.chain_ids[keep], self.config,
            {chain: self.traces[chain]} if chain in self.traces else None,
            {chain: self.acceptance[chain]} if chain in self.acceptance else None,
            self.meta,
        )

    @classmethod
    def concat(cls, parts: Sequence["PosteriorSamples"]) -> "PosteriorSamples":
        """Pool chains by stacking rows; every draw gets equal weight."""
        if not parts:
            raise ValueError("nothing to pool")
        names = parts[0].names
        for p in parts[1:]:
            if p.names != names:
                raise ValueError("cannot pool samples with different columns")
        traces, acc = {}, {}
        for p in parts:
            traces.update(p.traces)
            acc.update(p.acceptance)
        return cls(
            np.vstack([p.draws for p in parts]),
            names,
            np.concatenate([p.chain_ids for p in parts]),
            parts[0].config,
            traces,
            acc,
            parts[0].meta,
        )


def credible_interval(samples, coverage: float = 0.8) -> tuple[float, float, float]:
    """Equal-tail interval and median.

    Quantiles use linear interpolation between order statistics (the
    ``linear`` / type 7 rule), so ``{1..100}`` at 80% gives (10.9, 50.5, 90.1).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 10:
        raise ValueError(f"need at least 10 draws for an interval, got {x.size}")
    if not 0.0 < coverage < 1.0:
        raise ValueError("coverage must lie in (0, 1)")
    tail = (1.0 - coverage) / 2.0
    lo, med, hi = np.quantile(x, [tail, 0.5, 1.0 - tail], method="linear")
    return float(lo), float(med), float(hi)


def variability_label(log10_g: float) -> str:
    """Qualitative reading of a log10 scaled variance."""
    if log10_g < -3:
        return "Very low"
    if log10_g < -2:
        return "Low"
    if log10_g < -1:
        return "Medium"
    return "High"


@dataclass
class FamilySummary:
    family: str
    median_series: np.ndarray = field(repr=False)
    median_rate: tuple[float, float, float]
    r: tuple[float, float, float] | None
    log10_g: tuple[float, float, float] | None
    label: str | None

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "median_rate": self.median_rate,
            "log10_g": self.log10_g,
            "label": self.label,
        }


def family_summary(samples: PosteriorSamples, family: str,
                   coverage: float = 0.8) -> FamilySummary:
    """Posterior of the across-site median of a rate family, plus its hyperparameters.

    ``family`` is one of mu, dp, dd, c, m, b, or ``1-mu`` for failure of
    maintenance (whose mean is ``1 - r_mu``).
    """
    base = family[2:] if family.startswith("1-") else family
    med = np.median(samples.site_matrix(base), axis=1)
    if family.startswith("1-"):
        med = 1.0 - med
    r = log10_g = label = None
    if f"r_{base}" in samples:
        rs = samples.column(f"r_{base}")
        if family.startswith("1-"):
            rs = 1.0 - rs
        if np.all(np.isfinite(rs)):
            r = credible_interval(rs, coverage)
    if f"g_{base}" in samples:
        g = samples.column(f"g_{base}")
        if np.all(np.isfinite(g)) and np.all(g > 0):
            log10_g = credible_interval(np.log10(g), coverage)
            label = variability_label(log10_g[1])
    return FamilySummary(family, med, credible_interval(med, coverage), r, log10_g, label)


@dataclass
class Scatter:
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    correlation: float
    slope: float
    intercept: float


def joint_scatter(samples: PosteriorSamples, param_x: str, param_y: str) -> Scatter:
    """Paired draws, Pearson correlation and least-squares line ``y = slope * x + intercept``."""
    x = samples.series(param_x)
    y = samples.series(param_y)
    if np.std(x) == 0 or np.std(y) == 0:
        corr = math.nan
    else:
        corr = float(np.corrcoef(x, y)[0, 1])
    slope, intercept = np.polyfit(x, y, 1) if np.std(x) > 0 else (math.nan, math.nan)
    return Scatter(x, y, corr, float(slope), float(intercept))


def site_intervals(samples: PosteriorSamples, family: str, coverage: float = 0.8) -> np.ndarray:
    """Rows of (site index, lower, median, upper) for each site of a family."""
    base = family[2:] if family.startswith("1-") else family
    block = samples.site_matrix(base)
    if family.startswith("1-"):
        block = 1.0 - block
    rows = []
    for j in range(block.shape[1]):
        rows.append((j + 1, *credible_interval(block[:, j], coverage)))
    return np.array(rows)


def split_rhat(chains: Sequence[np.ndarray]) -> float:
    """Split potential scale reduction factor over a list of 1-d chains."""
    halves = []
    for c in chains:
        c = np.asarray(c, dtype=float)
        n = c.size // 2
        if n < 2:
            raise ValueError("each chain needs at least 4 draws")
        halves.extend([c[:n], c[-n:]])
    n = min(h.size for h in halves)
    arr = np.vstack([h[:n] for h in halves])
    means = arr.mean(axis=1)
    within = arr.var(axis=1, ddof=1).mean()
    between = n * means.var(ddof=1)
    if within == 0:
        return 1.0 if between == 0 else math.inf
    var_plus = (n - 1) / n * within + between / n
    return float(math.sqrt(var_plus / within))


def autocorrelation(x, lag: int) -> float:
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    den = np.dot(x, x)
    if den == 0 or lag >= x.size:
        return 0.0
    return float(np.dot(x[:-lag or None], x[lag:]) / den) if lag else 1.0


def summarize(samples: PosteriorSamples, coverage: float = 0.8) -> dict:
    """Summary document: per-family intervals, variability labels and convergence checks."""
    out = {"coverage": coverage, "n_draws": len(samples), "chains": samples.chains(),
           "families": {}}
    fams = ["1-mu", "dp", "dd", "c", "m"]
    if samples.n_sites and "b.1" in samples:
        fams.append("b")
    for fam in fams:
        try:
            fs = family_summary(samples, fam, coverage)
        except KeyError:
            continue
        if fam == "c" and not np.any(fs.median_series):
            # conversion error switched off
            continue
        out["families"][fam] = fs.as_dict()
    shared = [n for n in ("mu", "dp", "dd", "m", "b", "c") if n in samples]
    if shared:
        out["shared"] = {n: credible_interval(samples.column(n), coverage) for n in shared}
    if len(samples.chains()) > 1:
        rhat = {}
        for name in ("r_mu", "r_dp", "r_dd", "r_c"):
            if name in samples and np.all(np.isfinite(samples.column(name))):
                parts = [samples.column(name)[samples.chain_ids == c] for c in samples.chains()]
                if min(p.size for p in parts) >= 4 and np.ptp(samples.column(name)) > 0:
                    rhat[name] = split_rhat(parts)
        out["split_rhat"] = rhat
    if samples.acceptance:
        out["acceptance"] = {str(k): v for k, v in samples.acceptance.items()}
    return out
