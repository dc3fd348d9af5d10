"""Independent checks on the likelihood and the sampler.

* ``brute_force_pattern_prob`` enumerates every latent configuration.
* ``expected_dyad_fractions`` gives exact methylated / hemimethylated /
  unmethylated dyad proportions for a single site.
* ``moment_fit`` inverts those proportions under stationarity, giving the
  ridge of (failure of maintenance, de novo) values consistent with them at
  each conversion error rate.
* ``em_fit`` maximises the likelihood of the shared-rate model by EM.

None of these call into the likelihood module; they rebuild the elementary
probabilities from the model definitions.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import least_squares

from .core import MethylationPattern, SiteRates
from .errors import DataError, EnumerationTooLarge

__all__ = [
    "EMResult",
    "MomentConstraints",
    "MomentFamily",
    "brute_force_pattern_prob",
    "em_fit",
    "expected_dyad_fractions",
    "moment_fit",
]

MAX_ENUM_SITES = 6
EM_PARAMS = ("mu", "dp", "dd", "m", "b", "c")


def _transition(p, q, d, mu, dp, dd):
    """Pr(q, d | p) written out from the event definitions; arrays broadcast."""
    maint = p * q * (d * mu + (1 - d) * (1 - mu))
    denovo = (1 - p) * (q * dp + (1 - q) * (1 - dp)) * (d * dd + (1 - d) * (1 - dd))
    return maint + denovo


def _emission(obs, truth, b, c, with_error):
    if not with_error:
        return (obs == truth).astype(float)
    return truth * (obs * (1 - c) + (1 - obs) * c) + (1 - truth) * (obs * b + (1 - obs) * (1 - b))


@lru_cache(maxsize=None)
def _latent_grid(s: int):
    combos = np.array(list(itertools.product((0, 1), repeat=3 * s)), dtype=float)
    return combos[:, :s], combos[:, s:2 * s], combos[:, 2 * s:]


def brute_force_pattern_prob(pat: MethylationPattern, rates: SiteRates,
                             with_error: bool = True) -> float:
    """Probability of an unordered pattern by summing over every latent path.

    Enumerates both strand-type assignments and all ``8**S`` values of the
    pre-replication parent, post-replication parent and daughter strands.

    Raises:
        EnumerationTooLarge: for more than six sites.
    """
    s = pat.n_sites
    if s > MAX_ENUM_SITES:
        raise EnumerationTooLarge(f"brute force limited to {MAX_ENUM_SITES} sites, got {s}")
    if rates.n_sites != s:
        raise ValueError("pattern and rates disagree on the number of sites")
    P, Q, D = _latent_grid(s)
    mu, dp, dd, m, b, c = (np.asarray(v)[None, :] for v in
                           (rates.mu, rates.delta_p, rates.delta_d, rates.m, rates.b, rates.c))
    base = (m ** P) * ((1 - m) ** (1 - P)) * _transition(P, Q, D, mu, dp, dd)

    def ordered(x, y):
        x = np.asarray(x, dtype=float)[None, :]
        y = np.asarray(y, dtype=float)[None, :]
        w = base * _emission(x, Q, b, c, with_error) * _emission(y, D, b, c, with_error)
        return float(np.prod(w, axis=1).sum())

    a, bb = pat.strand_a, pat.strand_b
    total = ordered(a, bb) + ordered(bb, a)
    if np.array_equal(a, bb):
        total *= 0.5
    return total


def expected_dyad_fractions(mu, dp, dd, m, b=0.0, c=0.0) -> tuple[float, float, float]:
    """Exact (methylated, hemimethylated, unmethylated) dyad probabilities at one site."""
    both = m * mu + (1 - m) * dp * dd
    parent_only = m * (1 - mu) + (1 - m) * dp * (1 - dd)
    daughter_only = (1 - m) * (1 - dp) * dd
    neither = (1 - m) * (1 - dp) * (1 - dd)
    # chance that a truly methylated / unmethylated strand reads as methylated
    r1, r0 = 1 - c, b
    p_m = both * r1 * r1 + (parent_only + daughter_only) * r1 * r0 + neither * r0 * r0
    p_u = (both * (1 - r1) ** 2 + (parent_only + daughter_only) * (1 - r1) * (1 - r0)
           + neither * (1 - r0) ** 2)
    p_h = 1.0 - p_m - p_u
    return float(p_m), float(p_h), float(p_u)


@dataclass(frozen=True)
class MomentConstraints:
    """Assumptions used to invert dyad proportions.

    Attributes:
        stationary: tie ``m`` to the stationary density of (mu, dp, dd).
        b: failure-of-conversion rate, held fixed.
        c: a single conversion error rate, or None to sweep ``c_grid``.
        parent_share: fraction of total de novo methylation on the parent
            strand (``dp = 2 * parent_share * mean``, ``dd = 2 * (1 - parent_share) * mean``).
        m: methylation density, required when ``stationary`` is False.
    """

    stationary: bool = True
    b: float = 0.003
    c: float | None = None
    c_grid: tuple[float, ...] = tuple(np.round(np.linspace(0.0, 0.06, 61), 6))
    parent_share: float = 0.5
    m: float | None = None


@dataclass
class MomentFamily:
    c: np.ndarray
    fail: np.ndarray          # 1 - mu
    denovo_mean: np.ndarray   # (dp + dd) / 2
    m: np.ndarray
    feasible: np.ndarray
    residual: np.ndarray

    def rows(self):
        for k in range(self.c.size):
            yield (self.c[k], self.fail[k], self.denovo_mean[k], self.m[k],
                   bool(self.feasible[k]), self.residual[k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["c", "one_minus_mu", "denovo_mean", "m", "feasible", "residual"])
        for row in self.rows():
            w.writerow([repr(float(v)) if not isinstance(v, bool) else int(v) for v in row])
        return buf.getvalue()

    def linear_fit(self, lo: float = 0.0, hi: float = 1.0, y: str = "fail") -> tuple[float, float]:
        """Least-squares slope and intercept of ``y`` against c over feasible points in [lo, hi]."""
        keep = self.feasible & (self.c >= lo) & (self.c <= hi)
        vals = getattr(self, y)[keep]
        slope, intercept = np.polyfit(self.c[keep], vals, 1)
        return float(slope), float(intercept)


def _rates_from(fail, dbar, share, cons: MomentConstraints):
    mu = 1.0 - fail
    dp = 2 * share * dbar
    dd = 2 * (1 - share) * dbar
    if cons.stationary:
        den = 1.0 + dp + dd - mu
        m = (dp + dd) / den if den > 0 else math.nan
    else:
        m = cons.m
    return mu, dp, dd, m


def _solve_one(observed, c, cons: MomentConstraints):
    p_m, _, p_u = observed
    share = cons.parent_share
    dmax = 0.5 / max(share, 1 - share)

    def resid(v):
        mu, dp, dd, m = _rates_from(v[0], v[1], share, cons)
        em, _, eu = expected_dyad_fractions(mu, dp, dd, m, cons.b, c)
        return [em - p_m, eu - p_u]

    best = None
    for start in ((0.02, 0.05), (0.1, 0.2), (0.3, 0.4), (0.01, 0.01), (0.6, 0.6)):
        sol = least_squares(resid, start, bounds=([0.0, 0.0], [1.0, dmax]),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15)
        res = float(np.max(np.abs(sol.fun)))
        if best is None or res < best[1]:
            best = (sol.x, res)
    (fail, dbar), res = best
    _, _, _, m = _rates_from(fail, dbar, share, cons)
    return fail, dbar, m, res


def moment_fit(observed, constraints: MomentConstraints = MomentConstraints(),
               tol: float = 1e-9) -> MomentFamily:
    """Rates reproducing observed dyad proportions, as a family indexed by c.

    For each conversion error rate ``c`` (one value, or the constraint's grid)
    solve for failure of maintenance ``1 - mu`` and mean de novo rate with the
    remaining constraints applied. Grid points with no solution inside the
    unit box (residual above ``tol``) are flagged infeasible.
    """
    observed = tuple(float(v) for v in observed)
    if len(observed) != 3 or abs(sum(observed) - 1.0) > 1e-9:
        raise ValueError("observed must be three proportions summing to 1")
    if not constraints.stationary and constraints.m is None:
        raise ValueError("non-stationary moment fits need a fixed m")
    grid = [constraints.c] if constraints.c is not None else list(constraints.c_grid)
    out = np.array([_solve_one(observed, c, constraints) for c in grid])
    return MomentFamily(
        c=np.array(grid, dtype=float),
        fail=out[:, 0],
        denovo_mean=out[:, 1],
        m=out[:, 2],
        feasible=out[:, 3] <= tol,
        residual=out[:, 3],
    )


# ---------------------------------------------------------------------------
# EM for the shared-rate model

_CONFIGS = np.array([(p, q, d) for p in (0, 1) for q in (0, 1) for d in (0, 1)], dtype=float)


def _code_posteriors(theta, with_error):
    """For each observed code 2x+y: its probability and the posterior over (p, q, d)."""
    p, q, d = _CONFIGS.T
    prior = theta["m"] ** p * (1 - theta["m"]) ** (1 - p) * _transition(
        p, q, d, theta["mu"], theta["dp"], theta["dd"])
    probs = np.empty(4)
    post = np.empty((4, 8))
    for k in range(4):
        x, y = k // 2, k % 2
        w = prior * _emission(x, q, theta["b"], theta["c"], with_error) \
            * _emission(y, d, theta["b"], theta["c"], with_error)
        probs[k] = w.sum()
        post[k] = w / probs[k] if probs[k] > 0 else 0.0
    return probs, post


def _counts(data):
    x = np.asarray(data.x, dtype=int)
    y = np.asarray(data.y, dtype=int)
    t0 = 2 * x + y
    t1 = 2 * y + x
    c0 = np.stack([(t0 == k).sum(axis=1) for k in range(4)], axis=1).astype(float)
    c1 = np.stack([(t1 == k).sum(axis=1) for k in range(4)], axis=1).astype(float)
    sym = np.all(x == y, axis=1)
    return c0, c1, sym


def _orientation_logs(c0, c1, probs):
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(probs)
        a = np.where(c0 > 0, c0 * logs, 0.0).sum(axis=1)
        b = np.where(c1 > 0, c1 * logs, 0.0).sum(axis=1)
    return a, b


def shared_loglik(data, theta: dict, with_error: bool = True) -> float:
    """Observed-data log-likelihood with every rate shared across sites."""
    c0, c1, sym = _counts(data)
    probs, _ = _code_posteriors(theta, with_error)
    a, b = _orientation_logs(c0, c1, probs)
    return float(np.where(sym, a, np.logaddexp(a, b)).sum())


@dataclass
class EMResult:
    params: dict
    loglik: float
    trace: np.ndarray = field(repr=False)
    n_iter: int
    converged: bool

    def trace_csv(self) -> str:
        lines = ["iteration,loglik"]
        lines += [f"{k},{v!r}" for k, v in enumerate(self.trace.tolist())]
        return "\n".join(lines) + "\n"


def em_fit(data, with_error: bool = True, fixed: dict | None = None, init: dict | None = None,
           tol: float = 1e-10, max_iter: int = 200_000) -> EMResult:
    """Maximum-likelihood fit of the shared-rate model by expectation-maximisation.

    The latent space per pattern is the strand-type assignment and, per
    site, the (p, q, d) triple; the E-step enumerates it exactly. Parameters
    in ``fixed`` are pinned (by default ``b = 0.003`` with error, and
    ``b = c = 0`` without). Stops when the log-likelihood gain drops below
    ``tol``.
    """
    if data is None or len(data) == 0:
        raise DataError("EM needs a non-empty dataset")
    pins = {"b": 0.003} if with_error else {"b": 0.0, "c": 0.0}
    pins.update(fixed or {})
    theta = {"mu": 0.9, "dp": 0.1, "dd": 0.1, "m": 0.5, "b": 0.01, "c": 0.02}
    theta.update(init or {})
    theta.update(pins)
    c0, c1, sym = _counts(data)
    n_sites_total = c0.sum()
    trace = []
    converged = False
    p, q, d = _CONFIGS.T
    xs = np.array([k // 2 for k in range(4)], dtype=float)[:, None]
    ys = np.array([k % 2 for k in range(4)], dtype=float)[:, None]
    for it in range(max_iter):
        probs, post = _code_posteriors(theta, with_error)
        a, b = _orientation_logs(c0, c1, probs)
        ll = float(np.where(sym, a, np.logaddexp(a, b)).sum())
        trace.append(ll)
        if it > 0 and ll - trace[-2] < tol:
            converged = True
            break
        w0 = np.where(sym, 0.5, np.exp(a - np.logaddexp(a, b)))
        code_w = (w0[:, None] * c0 + (1 - w0)[:, None] * c1).sum(axis=0)
        e = code_w[:, None] * post  # expected counts of (code, config)
        ep = (e * p).sum()
        e_not_p = (e * (1 - p)).sum()
        new = dict(theta)
        new["m"] = ep / n_sites_total
        new["mu"] = (e * p * d).sum() / ep if ep > 0 else theta["mu"]
        new["dp"] = (e * (1 - p) * q).sum() / e_not_p if e_not_p > 0 else theta["dp"]
        new["dd"] = (e * (1 - p) * d).sum() / e_not_p if e_not_p > 0 else theta["dd"]
        if with_error:
            true_m = (e * (q + d)).sum()
            true_u = (e * ((1 - q) + (1 - d))).sum()
            miss_m = (e * (q * (1 - xs) + d * (1 - ys))).sum()
            miss_u = (e * ((1 - q) * xs + (1 - d) * ys)).sum()
            new["c"] = miss_m / true_m if true_m > 0 else theta["c"]
            new["b"] = miss_u / true_u if true_u > 0 else theta["b"]
        new.update(pins)
        theta = {k: float(v) for k, v in new.items()}
    return EMResult(dict(theta), trace[-1], np.array(trace), len(trace), converged)
