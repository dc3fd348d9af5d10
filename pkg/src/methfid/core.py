"""Domain types and single-site probabilities for double-stranded methylation.

A CpG dyad is observed as a pair of bits, one per strand. The transmission
model has three latent bits per site: the pre-replication parent ``p``, the
post-replication parent ``q`` and the daughter ``d``. Bisulfite conversion
then corrupts each observed bit independently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "BMode",
    "HyperParams",
    "LatentTriple",
    "MethylationPattern",
    "SiteRates",
    "error_prob",
    "event_prob",
    "site_joint_table",
    "single_site_joint",
    "FAMILIES",
]

# Order of the six per-site rate vectors everywhere in the package.
FAMILIES = ("mu", "dp", "dd", "m", "b", "c")

# (q, d, p) -> (description, callable(mu, dp, dd)). Mirrors the transition
# table row for row so that tests can compare against it directly.
_EVENT_TABLE = {
    (0, 0, 1): ("assumed not to occur", lambda mu, dp, dd: 0.0),
    (0, 1, 1): ("assumed not to occur", lambda mu, dp, dd: 0.0),
    (1, 0, 1): ("failure of maintenance", lambda mu, dp, dd: 1.0 - mu),
    (1, 1, 1): ("maintenance", lambda mu, dp, dd: mu),
    (0, 0, 0): ("no de novo", lambda mu, dp, dd: (1.0 - dp) * (1.0 - dd)),
    (0, 1, 0): ("de novo on daughter only", lambda mu, dp, dd: (1.0 - dp) * dd),
    (1, 0, 0): ("de novo on parent only", lambda mu, dp, dd: dp * (1.0 - dd)),
    (1, 1, 0): ("de novo on both strands", lambda mu, dp, dd: dp * dd),
}


def _as_strand(bits) -> np.ndarray:
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits]
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("a strand must be a non-empty 1-d bit vector")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("strand entries must be 0 or 1")
    out = arr.astype(np.int8)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MethylationPattern:
    """An unordered pair of equal-length binary strands.

    Strand order carries no information; ``swapped()`` is O(1) and two
    patterns compare equal whenever they hold the same pair of strands.
    """

    strand_a: np.ndarray
    strand_b: np.ndarray
    id: str = ""

    def __post_init__(self):
        a = _as_strand(self.strand_a)
        b = _as_strand(self.strand_b)
        if a.size != b.size:
            raise ValueError(
                f"strands differ in length ({a.size} vs {b.size})"
            )
        object.__setattr__(self, "strand_a", a)
        object.__setattr__(self, "strand_b", b)

    @classmethod
    def from_strings(cls, a: str, b: str, id: str = "") -> "MethylationPattern":
        return cls(a, b, id)

    @property
    def n_sites(self) -> int:
        return int(self.strand_a.size)

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.strand_a, self.strand_b))

    def swapped(self) -> "MethylationPattern":
        return MethylationPattern(self.strand_b, self.strand_a, self.id)

    def strings(self) -> tuple[str, str]:
        return (
            "".join(map(str, self.strand_a.tolist())),
            "".join(map(str, self.strand_b.tolist())),
        )

    def _key(self):
        return frozenset([self.strings()]) | frozenset([self.strings()[::-1]])

    def __eq__(self, other):
        if not isinstance(other, MethylationPattern):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        a, b = self.strings()
        return f"MethylationPattern({{{a}, {b}}}, id={self.id!r})"


def _prob_vector(values, name: str, n: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float, ndmin=1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector")
    if n is not None and arr.size == 1 and n > 1:
        arr = np.full(n, arr[0])
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise InvalidParameterError(f"{name} entries must lie in [0, 1]")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SiteRates:
    """Per-site rate vectors, all of length S.

    Scalars are broadcast to the length of ``mu``.
    """

    mu: np.ndarray
    delta_p: np.ndarray
    delta_d: np.ndarray
    m: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        n = np.array(self.mu, ndmin=1).size
        for name in ("mu", "delta_p", "delta_d", "m", "b", "c"):
            object.__setattr__(self, name, _prob_vector(getattr(self, name), name, n))
        if len({getattr(self, k).size for k in ("mu", "delta_p", "delta_d", "m", "b", "c")}) != 1:
            raise ValueError("all rate vectors must share the same length")

    @property
    def n_sites(self) -> int:
        return int(self.mu.size)

    @classmethod
    def shared(cls, n_sites: int, mu, delta_p, delta_d, m, b=0.0, c=0.0) -> "SiteRates":
        """Same rates at every site."""
        return cls(*(np.full(n_sites, float(v)) for v in (mu, delta_p, delta_d, m, b, c)))

    @classmethod
    def from_array(cls, arr) -> "SiteRates":
        """Build from a (6, S) array in ``FAMILIES`` order."""
        arr = np.asarray(arr, dtype=float)
        return cls(*arr)

    def as_array(self) -> np.ndarray:
        """Return a fresh (6, S) array in ``FAMILIES`` order."""
        return np.vstack([self.mu, self.delta_p, self.delta_d, self.m, self.b, self.c])

    def without_error(self) -> "SiteRates":
        z = np.zeros(self.n_sites)
        return SiteRates(self.mu, self.delta_p, self.delta_d, self.m, z, z)

    def replace(self, **kw) -> "SiteRates":
        vals = {k: getattr(self, k) for k in ("mu", "delta_p", "delta_d", "m", "b", "c")}
        vals.update(kw)
        return SiteRates(**vals)

    def __eq__(self, other):
        if not isinstance(other, SiteRates):
            return NotImplemented
        return np.array_equal(self.as_array(), other.as_array())


class BMode(enum.Enum):
    FIXED = "fixed"
    HIERARCHICAL = "hierarchical"


@dataclass(frozen=True)
class HyperParams:
    """Means ``r`` and scaled variances ``g`` of the per-site beta priors.

    ``b_value`` is the common failure-of-conversion rate used when
    ``b_mode`` is FIXED; ``r_b``/``g_b`` are ignored in that case.
    """

    r_mu: float = 0.5
    g_mu: float = 0.01
    r_dp: float = 0.5
    g_dp: float = 0.01
    r_dd: float = 0.5
    g_dd: float = 0.01
    r_b: float = 0.03
    g_b: float = 0.01
    r_c: float = 0.03
    g_c: float = 0.01
    g_m: float = 0.01
    b_mode: BMode = BMode.FIXED
    b_value: float = 0.003

    def __post_init__(self):
        for name in ("r_mu", "g_mu", "r_dp", "g_dp", "r_dd", "g_dd", "r_b", "g_b",
                     "r_c", "g_c", "g_m"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InvalidParameterError(f"{name}={v} must lie in the open interval (0, 1)")
        if not 0.0 <= self.b_value <= 1.0:
            raise InvalidParameterError("b_value must lie in [0, 1]")

    def rg(self, family: str) -> tuple[float, float]:
        return getattr(self, f"r_{family}"), getattr(self, f"g_{family}")


@dataclass(frozen=True)
class LatentTriple:
    """Latent bits at one site: parent before (p) and after (q) replication, daughter (d)."""

    p: int
    q: int
    d: int

    def __post_init__(self):
        for v in (self.p, self.q, self.d):
            if v not in (0, 1):
                raise ValueError("latent bits must be 0 or 1")
        if self.p == 1 and self.q == 0:
            raise ValueError("a methylated parent cannot lose methylation (p=1 implies q=1)")

    @staticmethod
    def all_valid() -> list["LatentTriple"]:
        return [
            LatentTriple(p, q, d)
            for p in (0, 1)
            for q in (0, 1)
            for d in (0, 1)
            if not (p == 1 and q == 0)
        ]


def event_prob(q: int, d: int, p: int, mu_j: float, dp_j: float, dd_j: float) -> float:
    """Probability of post-replication bits ``(q, d)`` given parent bit ``p``."""
    return float(_EVENT_TABLE[(int(q), int(d), int(p))][1](mu_j, dp_j, dd_j))


def error_prob(observed: int, truth: int, b_j: float, c_j: float) -> float:
    """Probability of reading ``observed`` when the true state is ``truth``."""
    if truth == 0:
        return b_j if observed == 1 else 1.0 - b_j
    return 1.0 - c_j if observed == 1 else c_j


def single_site_joint(x: int, y: int, j: int, rates: SiteRates, with_error: bool = True) -> float:
    """Probability that site ``j`` shows ``x`` on the parent and ``y`` on the daughter.

    ``j`` is a zero-based site index. With ``with_error`` the result is for
    the observed (converted) bits, otherwise for the true bits.
    """
    if not 0 <= j < rates.n_sites:
        raise IndexError(f"site index {j} out of range for S={rates.n_sites}")
    mu, dp, dd, m = rates.mu[j], rates.delta_p[j], rates.delta_d[j], rates.m[j]
    b, c = rates.b[j], rates.c[j]
    total = 0.0
    for p in (0, 1):
        w = m if p else 1.0 - m
        if not with_error:
            total += w * event_prob(x, y, p, mu, dp, dd)
            continue
        for q in (0, 1):
            for d in (0, 1):
                h = event_prob(q, d, p, mu, dp, dd)
                if h == 0.0:
                    continue
                total += w * h * error_prob(x, q, b, c) * error_prob(y, d, b, c)
    return total


def site_joint_table(rates: SiteRates, with_error: bool = True) -> np.ndarray:
    """Vectorised ``single_site_joint`` for every site.

    Returns an (S, 2, 2) array ``J`` with ``J[j, x, y]`` the probability of
    reading ``x`` on the parent strand and ``y`` on the daughter at site j.
    """
    mu, dp, dd, m = rates.mu, rates.delta_p, rates.delta_d, rates.m
    true = np.empty((rates.n_sites, 2, 2))
    true[:, 0, 0] = (1 - m) * (1 - dp) * (1 - dd)
    true[:, 0, 1] = (1 - m) * (1 - dp) * dd
    true[:, 1, 0] = (1 - m) * dp * (1 - dd) + m * (1 - mu)
    true[:, 1, 1] = (1 - m) * dp * dd + m * mu
    if not with_error:
        return true
    # emission[j, truth, observed]
    b, c = rates.b, rates.c
    emit = np.empty((rates.n_sites, 2, 2))
    emit[:, 0, 0] = 1 - b
    emit[:, 0, 1] = b
    emit[:, 1, 0] = c
    emit[:, 1, 1] = 1 - c
    return np.einsum("jqd,jqx,jdy->jxy", true, emit, emit)


def patterns_from_strings(pairs: Iterable[tuple[str, str]]) -> list[MethylationPattern]:
    return [MethylationPattern(a, b, f"p{i + 1}") for i, (a, b) in enumerate(pairs)]
