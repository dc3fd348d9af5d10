"""Compiled inner loops shared by the likelihood cache and the sampler.

Everything here works on plain arrays. Site observations are encoded as
``2 * parent_bit + daughter_bit`` so a site's joint table is a length-4
vector. ``t0[i, j]`` is the code when the first listed strand of pattern i is
taken as the parent, ``t1[i, j]`` the code for the opposite assignment.
"""

import math

import numba
import numpy as np

NEG_INF = -np.inf

_jit = numba.njit(cache=True, nogil=True)


@_jit
def site_table_c(mu, omu, dp, odp, dd, odd, m, om, b, ob, c, oc, with_error):
    """Joint probabilities of the four (parent, daughter) readings at one site.

    Each rate is passed with its complement (``omu = 1 - mu`` and so on) so
    that rates within rounding distance of 0 or 1 keep full precision.
    """
    t00 = om * odp * odd
    t01 = om * odp * dd
    t10 = om * dp * odd + m * omu
    t11 = om * dp * dd + m * mu
    out = np.empty(4)
    if not with_error:
        out[0] = t00
        out[1] = t01
        out[2] = t10
        out[3] = t11
        return out
    e00 = ob  # truth 0 read as 0
    e01 = b
    e10 = c
    e11 = oc
    # out[2x + y] = sum_{q,d} true[q,d] * e[q,x] * e[d,y]
    for x in range(2):
        eq0 = e00 if x == 0 else e01
        eq1 = e10 if x == 0 else e11
        for y in range(2):
            ed0 = e00 if y == 0 else e01
            ed1 = e10 if y == 0 else e11
            out[2 * x + y] = (t00 * eq0 * ed0 + t01 * eq0 * ed1
                              + t10 * eq1 * ed0 + t11 * eq1 * ed1)
    return out


@_jit
def site_table(mu, dp, dd, m, b, c, with_error):
    return site_table_c(mu, 1.0 - mu, dp, 1.0 - dp, dd, 1.0 - dd, m, 1.0 - m,
                        b, 1.0 - b, c, 1.0 - c, with_error)


@_jit
def log_table(tab, logs, zeros):
    for k in range(4):
        if tab[k] > 0.0:
            logs[k] = math.log(tab[k])
            zeros[k] = 0
        else:
            logs[k] = 0.0
            zeros[k] = 1


@_jit
def combine(l0, z0, l1, z1, sym):
    """Log-probability of an unordered pattern from its two orientation terms."""
    a = l0 if z0 == 0 else NEG_INF
    if sym:
        return a
    b = l1 if z1 == 0 else NEG_INF
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@_jit
def init_cache(t0, t1, sym, logs, zeros, L, Z, pll):
    """Cold evaluation. ``logs``/``zeros`` are (S, 4). Fills L, Z, pll; returns the total."""
    n, s = t0.shape
    total = 0.0
    for i in range(n):
        l0 = 0.0
        l1 = 0.0
        z0 = 0
        z1 = 0
        for j in range(s):
            k0 = t0[i, j]
            k1 = t1[i, j]
            l0 += logs[j, k0]
            z0 += zeros[j, k0]
            l1 += logs[j, k1]
            z1 += zeros[j, k1]
        L[i, 0] = l0
        L[i, 1] = l1
        Z[i, 0] = z0
        Z[i, 1] = z1
        pll[i] = combine(l0, z0, l1, z1, sym[i])
        total += pll[i]
    return total


@_jit
def site_delta(j, t0, t1, sym, L, Z, pll, old_logs, old_zeros, new_logs, new_zeros,
               L_new, Z_new, pll_new):
    """Change in total log-likelihood when site j's table is swapped.

    Writes the candidate per-pattern values into the ``*_new`` buffers without
    touching the cache. Returns -inf if the candidate has zero probability.
    """
    n = t0.shape[0]
    old_total = 0.0
    new_total = 0.0
    for i in range(n):
        k0 = t0[i, j]
        k1 = t1[i, j]
        l0 = L[i, 0] - old_logs[k0] + new_logs[k0]
        z0 = Z[i, 0] - old_zeros[k0] + new_zeros[k0]
        l1 = L[i, 1] - old_logs[k1] + new_logs[k1]
        z1 = Z[i, 1] - old_zeros[k1] + new_zeros[k1]
        L_new[i, 0] = l0
        L_new[i, 1] = l1
        Z_new[i, 0] = z0
        Z_new[i, 1] = z1
        v = combine(l0, z0, l1, z1, sym[i])
        pll_new[i] = v
        old_total += pll[i]
        new_total += v
    if new_total == NEG_INF:
        return NEG_INF
    if old_total == NEG_INF:
        return np.inf
    return new_total - old_total


@_jit
def commit(L, Z, pll, L_new, Z_new, pll_new):
    n = L.shape[0]
    total = 0.0
    for i in range(n):
        L[i, 0] = L_new[i, 0]
        L[i, 1] = L_new[i, 1]
        Z[i, 0] = Z_new[i, 0]
        Z[i, 1] = Z_new[i, 1]
        pll[i] = pll_new[i]
        total += pll[i]
    return total


@_jit
def log_expit(z):
    """log(1 / (1 + exp(-z))) without overflow or cancellation."""
    if z >= 0.0:
        return -math.log1p(math.exp(-z))
    return z - math.log1p(math.exp(z))


@_jit
def beta_logpdf_logs(lx, l1x, a, b):
    """Beta(a, b) log-density from log(x) and log(1 - x)."""
    if not (a > 0.0 and b > 0.0):
        return NEG_INF
    return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
            + (a - 1.0) * lx + (b - 1.0) * l1x)


@_jit
def beta_rg_logpdf(x, r, g):
    """Log-density of the beta law with mean r and scaled variance g."""
    if not (x > 0.0 and x < 1.0):
        return NEG_INF
    s = (1.0 - g) / g
    return beta_logpdf_logs(math.log(x), math.log1p(-x), r * s, (1.0 - r) * s)


@_jit
def stationary_mean(mu, dp, dd):
    den = 1.0 + dp + dd - mu
    if den <= 1e-12:
        return np.nan
    return (dp + dd) / den
