"""Exact log-likelihood of unordered double-stranded patterns.

Per-site sums stay in the linear domain (at most eight terms); products over
sites and patterns are accumulated as logs. The two possible strand-type
assignments of a pattern are combined with log-sum-exp.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import _kernels
from .core import MethylationPattern, SiteRates, site_joint_table
from .errors import DataError, DimensionError

__all__ = [
    "Dataset",
    "LikelihoodCache",
    "dataset_loglik",
    "ordered_loglik",
    "pattern_loglik",
]


class Dataset:
    """A non-empty collection of patterns sharing one site count."""

    def __init__(self, patterns: Sequence[MethylationPattern], source: str = ""):
        patterns = tuple(patterns)
        if not patterns:
            raise DataError("a dataset needs at least one pattern")
        s = patterns[0].n_sites
        for k, pat in enumerate(patterns):
            if pat.n_sites != s:
                raise DimensionError(
                    f"pattern {k + 1} has {pat.n_sites} sites, expected {s}"
                )
        self.patterns = patterns
        self.source = source
        self._x = np.vstack([p.strand_a for p in patterns]).astype(np.int8)
        self._y = np.vstack([p.strand_b for p in patterns]).astype(np.int8)
        self._x.setflags(write=False)
        self._y.setflags(write=False)

    @classmethod
    def from_arrays(cls, x, y, source: str = "", ids=None) -> "Dataset":
        x = np.asarray(x)
        y = np.asarray(y)
        if x.shape != y.shape or x.ndim != 2:
            raise DimensionError("strand arrays must be two equal (N, S) matrices")
        ids = ids if ids is not None else [f"p{i + 1}" for i in range(x.shape[0])]
        return cls([MethylationPattern(a, b, i) for a, b, i in zip(x, y, ids)], source)

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def n_patterns(self) -> int:
        return len(self.patterns)

    @property
    def n_sites(self) -> int:
        return self.patterns[0].n_sites

    def __repr__(self):
        return f"Dataset(N={self.n_patterns}, S={self.n_sites}, source={self.source!r})"

    def __len__(self):
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.n_patterns == other.n_patterns
            and all(
                p.id == q.id
                and np.array_equal(p.strand_a, q.strand_a)
                and np.array_equal(p.strand_b, q.strand_b)
                for p, q in zip(self.patterns, other.patterns)
            )
        )

    def __add__(self, other: "Dataset") -> "Dataset":
        return Dataset(self.patterns + other.patterns, self.source)

    def site_codes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Observation codes for both orientations and the symmetric-pattern mask."""
        t0 = (2 * self._x + self._y).astype(np.int64)
        t1 = (2 * self._y + self._x).astype(np.int64)
        sym = np.all(self._x == self._y, axis=1)
        return t0, t1, sym

    def dyad_fractions(self) -> tuple[float, float, float]:
        """Observed proportions of methylated, hemimethylated and unmethylated dyads."""
        tot = self._x.astype(int) + self._y.astype(int)
        n = tot.size
        return (
            float(np.sum(tot == 2) / n),
            float(np.sum(tot == 1) / n),
            float(np.sum(tot == 0) / n),
        )


def _check(s: int, rates: SiteRates):
    if s != rates.n_sites:
        raise DimensionError(f"strands have {s} sites but rates have {rates.n_sites}")


def _log(v):
    with np.errstate(divide="ignore"):
        return np.log(v)


def ordered_loglik(x, y, rates: SiteRates, with_error: bool = True) -> float:
    """Log-probability that the parent reads ``x`` and the daughter reads ``y``."""
    x = np.asarray(x, dtype=int)
    y = np.asarray(y, dtype=int)
    if x.shape != y.shape:
        raise DimensionError("strands differ in length")
    _check(x.size, rates)
    table = site_joint_table(rates, with_error)
    return float(np.sum(_log(table[np.arange(x.size), x, y])))


def pattern_loglik(pat: MethylationPattern, rates: SiteRates, with_error: bool = True) -> float:
    """Log-probability of an unordered pattern, summing over strand type."""
    _check(pat.n_sites, rates)
    a = ordered_loglik(pat.strand_a, pat.strand_b, rates, with_error)
    if pat.symmetric:
        # (1/2) * 2 * P(x, x)
        return a
    b = ordered_loglik(pat.strand_b, pat.strand_a, rates, with_error)
    return float(np.logaddexp(a, b))


def dataset_loglik(data: Dataset, rates: SiteRates, with_error: bool = True) -> float:
    """Sum of pattern log-likelihoods over the dataset."""
    _check(data.n_sites, rates)
    table = _log(site_joint_table(rates, with_error))
    sites = np.arange(data.n_sites)
    a = table[sites, data.x, data.y].sum(axis=1)
    b = table[sites, data.y, data.x].sum(axis=1)
    sym = np.all(data.x == data.y, axis=1)
    per = np.where(sym, a, np.logaddexp(a, b))
    return float(per.sum())


class LikelihoodCache:
    """Dataset log-likelihood with O(N) single-site updates.

    Per pattern and orientation the cache keeps the sum of log site factors
    and a count of zero factors, so a site change only touches that site's
    contribution and zero-probability states stay exact.
    """

    def __init__(self, data: Dataset, rates: SiteRates, with_error: bool = True):
        _check(data.n_sites, rates)
        self.data = data
        self.with_error = with_error
        self.t0, self.t1, self.sym = data.site_codes()
        n, s = self.t0.shape
        self._rates = rates.as_array()
        self.logs = np.empty((s, 4))
        self.zeros = np.empty((s, 4), dtype=np.int64)
        self.L = np.empty((n, 2))
        self.Z = np.empty((n, 2), dtype=np.int64)
        self.pll = np.empty(n)
        self._L_new = np.empty_like(self.L)
        self._Z_new = np.empty_like(self.Z)
        self._pll_new = np.empty_like(self.pll)
        self.total = self.recompute()

    @property
    def rates(self) -> SiteRates:
        return SiteRates.from_array(self._rates)

    def _fill_site(self, j, logs, zeros, values):
        tab = _kernels.site_table(*values, self.with_error)
        _kernels.log_table(tab, logs, zeros)

    def recompute(self) -> float:
        """Cold evaluation from the stored rates; resets the cache."""
        for j in range(self._rates.shape[1]):
            self._fill_site(j, self.logs[j], self.zeros[j], self._rates[:, j])
        self.total = _kernels.init_cache(
            self.t0, self.t1, self.sym, self.logs, self.zeros, self.L, self.Z, self.pll
        )
        return self.total

    def propose_site(self, j: int, values) -> float:
        """Log-likelihood change if site ``j`` took ``values`` (six rates, ``FAMILIES`` order)."""
        logs = np.empty(4)
        zeros = np.empty(4, dtype=np.int64)
        self._fill_site(j, logs, zeros, np.asarray(values, dtype=float))
        self._pending = (j, np.array(values, dtype=float), logs, zeros)
        return _kernels.site_delta(
            j, self.t0, self.t1, self.sym, self.L, self.Z, self.pll,
            self.logs[j], self.zeros[j], logs, zeros,
            self._L_new, self._Z_new, self._pll_new,
        )

    def accept(self) -> float:
        j, values, logs, zeros = self._pending
        self._rates[:, j] = values
        self.logs[j] = logs
        self.zeros[j] = zeros
        self.total = _kernels.commit(
            self.L, self.Z, self.pll, self._L_new, self._Z_new, self._pll_new
        )
        self._pending = None
        return self.total

    def update_site(self, j: int, values) -> float:
        """Change site ``j``'s rates and return the new total."""
        self.propose_site(j, values)
        return self.accept()

    def audit(self) -> float:
        """Absolute gap between the cached total and a cold recomputation."""
        cold = dataset_loglik(self.data, self.rates, self.with_error)
        if np.isneginf(cold) and np.isneginf(self.total):
            return 0.0
        return abs(cold - self.total)
