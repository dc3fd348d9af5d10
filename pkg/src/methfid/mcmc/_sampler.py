"""Compiled Metropolis-within-Gibbs kernels.

State layout
------------
``U``     (6, S) logits of the site rates, rows in ``core.FAMILIES`` order
          (mu, dp, dd, m, b, c). Families that are not sampled hold their
          fixed value's logit (``-inf`` for a rate pinned at zero).
``hr``    (5,) family means for mu, dp, dd, b, c.
``hlg``   (6,) log10 scaled variances for mu, dp, dd, b, c, m.
``fam_on`` (6,) 1 where the site family is sampled (and, except m, carries a beta prior).
``st``    (2,) cached log-likelihood and log-prior of the logits.

Keeping logits rather than rates means a rate within rounding distance of 0
or 1 still has an exact log-density: ``log x`` and ``log(1 - x)`` come from
``log_expit`` and complements from ``expit(-z)``. The prior is held as the
density of the logits themselves (beta density times dx/dz, combined
analytically), which stays accurate at extreme logits and needs no Jacobian
in single-site ratios. Reported log-posteriors are converted back to the
density of the rates.

Site rates move by Gaussian random walks on the logit scale; family means and
log10 g move by plain Gaussian random walks and are rejected outside their
uniform supports. After its random walk every site rate also gets an
independence proposal drawn from its conditional beta prior; a new mu, dp or
dd carries m along so that m keeps its scaled offset from the stationary
density.

Each hyperparameter also gets a joint move that carries its family's site
rates along (shifting or rescaling their logits about the family centre), so
the chain can cross the narrow region between small g and tightly clustered
sites without waiting for single-site steps. ``r_scale`` / ``g_scale`` and
their acceptance counters are (2, k): row 0 for the plain moves, row 1 for
the joint ones.
"""

import math

import numba
import numpy as np

from .._kernels import (
    commit,
    init_cache,
    log_expit,
    log_table,
    site_delta,
    site_table,
    site_table_c,
)

MU, DP, DD, M, B, C = 0, 1, 2, 3, 4, 5
# site family -> index into hr / hlg
HYPER_OF = np.array([0, 1, 2, -1, 3, 4], dtype=np.int64)
G_M = 5
LG_LO, LG_HI = -4.0, 0.0
NEG_INF = -np.inf

SCALE_BOUNDS = (1e-4, 20.0)

_jit = numba.njit(cache=True, nogil=True)


@_jit
def expit(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@_jit
def logit(x):
    return math.log(x) - math.log1p(-x)


@_jit
def logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@_jit
def site_centre(U, j):
    """log rm and log(1 - rm) of site j's stationary methylation density.

    Worked out from the logits, so it stays exact when 1 - mu, dp and dd
    are all far below double precision; it is only undefined if all three
    are exactly zero.
    """
    lomu = log_expit(-U[MU, j])
    lnum = logaddexp(log_expit(U[DP, j]), log_expit(U[DD, j]))
    lden = logaddexp(lomu, lnum)
    return lnum - lden, lomu - lden


@_jit
def logit_beta_logpdf(z, la, lb):
    """Log-density of ``z = logit(x)`` for ``x ~ Beta(a, b)``, shapes given as logs.

    Written as ``a log x + b log(1 - x) - log B(a, b)``: adding the logit
    Jacobian to the beta density term by term would cancel catastrophically
    at extreme logits. Valid when a or b underflows.
    """
    if not (math.isfinite(la) and math.isfinite(lb)):
        return NEG_INF
    a = math.exp(la)
    b = math.exp(lb)
    # lgamma(a) = lgamma(a + 1) - log a
    return (math.lgamma(a + b) - math.lgamma(a + 1.0) + la - math.lgamma(b + 1.0) + lb
            + a * log_expit(z) + b * log_expit(-z))


@_jit
def beta_rg_logpdf_z(z, lr, lor, g):
    """Logit-scale density of a Beta(mean r, scaled variance g) rate, from log r and log(1 - r)."""
    ls = math.log1p(-g) - math.log(g)
    return logit_beta_logpdf(z, lr + ls, lor + ls)


@_jit
def _fam_prior_z(z, r, lg):
    return beta_rg_logpdf_z(z, math.log(r), math.log1p(-r), 10.0 ** lg)


@_jit
def m_logprior(U, j, lg_m):
    lrm, lorm = site_centre(U, j)
    if not (math.isfinite(lrm) and math.isfinite(lorm)):
        return NEG_INF
    return beta_rg_logpdf_z(U[M, j], lrm, lorm, 10.0 ** lg_m)


@_jit
def site_logprior(f, j, U, hr, hlg):
    """Prior terms that involve ``U[f, j]``."""
    if f == M:
        return m_logprior(U, j, hlg[G_M])
    k = HYPER_OF[f]
    lp = _fam_prior_z(U[f, j], hr[k], hlg[k])
    if f == MU or f == DP or f == DD:
        lp += m_logprior(U, j, hlg[G_M])
    return lp


@_jit
def family_logprior(f, U, r, lg):
    lr = math.log(r)
    lor = math.log1p(-r)
    g = 10.0 ** lg
    lp = 0.0
    for j in range(U.shape[1]):
        lp += beta_rg_logpdf_z(U[f, j], lr, lor, g)
    return lp


@_jit
def m_family_logprior(U, lg_m):
    lp = 0.0
    for j in range(U.shape[1]):
        lp += m_logprior(U, j, lg_m)
    return lp


@_jit
def cold_logprior(U, hr, hlg, fam_on, rub):
    for f in range(6):
        if f == M or fam_on[f] == 0:
            continue
        k = HYPER_OF[f]
        if not (hr[k] > 0.0 and hr[k] < rub[k]):
            return NEG_INF
        if not (hlg[k] > LG_LO and hlg[k] < LG_HI):
            return NEG_INF
    if not (hlg[G_M] > LG_LO and hlg[G_M] < LG_HI):
        return NEG_INF
    lp = 0.0
    for f in range(6):
        if f == M or fam_on[f] == 0:
            continue
        k = HYPER_OF[f]
        lp += family_logprior(f, U, hr[k], hlg[k])
    lp += m_family_logprior(U, hlg[G_M])
    return lp


@_jit
def logit_jacobian_total(U, fam_on):
    """Sum of log dz/dx over the sampled logits: the log prior of the logits
    minus this is the log prior density of the rates themselves."""
    tot = 0.0
    for f in range(6):
        if fam_on[f] == 0:
            continue
        for j in range(U.shape[1]):
            tot += log_jacobian(U[f, j])
    return tot


@_jit
def site_probs(U, j, with_error):
    return site_table_c(
        expit(U[MU, j]), expit(-U[MU, j]), expit(U[DP, j]), expit(-U[DP, j]),
        expit(U[DD, j]), expit(-U[DD, j]), expit(U[M, j]), expit(-U[M, j]),
        expit(U[B, j]), expit(-U[B, j]), expit(U[C, j]), expit(-U[C, j]), with_error)


@_jit
def fill_tables(U, with_error, logs, zeros):
    for j in range(U.shape[1]):
        log_table(site_probs(U, j, with_error), logs[j], zeros[j])


@_jit
def cold_loglik(U, with_error, t0, t1, sym, logs, zeros, L, Z, pll):
    fill_tables(U, with_error, logs, zeros)
    return init_cache(t0, t1, sym, logs, zeros, L, Z, pll)


@_jit
def log_jacobian(z):
    """log dx/dz for x = expit(z)."""
    return log_expit(z) + log_expit(-z)


@_jit
def site_log_accept(f, j, zn, U, hr, hlg, with_error, lik_on,
                    t0, t1, sym, L, Z, pll, logs, zeros,
                    new_logs, new_zeros, L_new, Z_new, pll_new, out):
    """Log acceptance ratio for moving the logit ``U[f, j]`` to ``zn``.

    Prior terms are logit-scale densities, so no separate Jacobian is needed.
    ``out`` receives the likelihood change and prior change.
    The candidate cache entries are left in the ``*_new`` buffers for ``commit``.
    """
    z = U[f, j]
    if not math.isfinite(zn):
        return NEG_INF
    lp_old = site_logprior(f, j, U, hr, hlg)
    U[f, j] = zn
    lp_new = site_logprior(f, j, U, hr, hlg)
    dl = 0.0
    if lik_on:
        log_table(site_probs(U, j, with_error), new_logs, new_zeros)
        dl = site_delta(j, t0, t1, sym, L, Z, pll, logs[j], zeros[j], new_logs, new_zeros,
                        L_new, Z_new, pll_new)
    U[f, j] = z
    out[0] = dl
    out[1] = lp_new - lp_old
    if lp_new == NEG_INF or dl == NEG_INF:
        return NEG_INF
    return dl + (lp_new - lp_old)


@_jit
def update_site(f, j, U, hr, hlg, scale, rng, with_error, lik_on,
                t0, t1, sym, L, Z, pll, logs, zeros,
                new_logs, new_zeros, L_new, Z_new, pll_new, st, buf):
    zn = U[f, j] + scale * rng.standard_normal()
    logr = site_log_accept(f, j, zn, U, hr, hlg, with_error, lik_on,
                           t0, t1, sym, L, Z, pll, logs, zeros,
                           new_logs, new_zeros, L_new, Z_new, pll_new, buf)
    if math.log(rng.random()) < logr:
        U[f, j] = zn
        if lik_on:
            st[0] = commit(L, Z, pll, L_new, Z_new, pll_new)
            for k in range(4):
                logs[j, k] = new_logs[k]
                zeros[j, k] = new_zeros[k]
        st[1] += buf[1]
        return 1
    return 0


@_jit
def log_gamma_variate(la, rng):
    """log of a Gamma(a, 1) draw given log a, finite even when the draw itself would underflow."""
    a = math.exp(la)
    return math.log(rng.standard_gamma(a + 1.0)) + math.log(rng.random()) * math.exp(-la)


@_jit
def site_prior_shapes(f, j, U, hr, hlg):
    """Logs of the beta shape parameters of the conditional prior of site rate (f, j)."""
    if f == M:
        lr, lor = site_centre(U, j)
        g = 10.0 ** hlg[G_M]
    else:
        k = HYPER_OF[f]
        lr, lor = math.log(hr[k]), math.log1p(-hr[k])
        g = 10.0 ** hlg[k]
    ls = math.log1p(-g) - math.log(g)
    return lr + ls, lor + ls


@_jit
def site_total_logprior(j, U, hr, hlg, fam_on):
    """Every prior term that involves site j."""
    lp = m_logprior(U, j, hlg[G_M])
    for f in (MU, DP, DD, B, C):
        if fam_on[f] == 1:
            k = HYPER_OF[f]
            lp += _fam_prior_z(U[f, j], hr[k], hlg[k])
    return lp


@_jit
def carry_m(U_old_col, U_new_col):
    """Logit of m after its site's stationary centre moves; returns (z_m, log Jacobian)."""
    l0, lo0 = _centre_of_column(U_old_col)
    l1, lo1 = _centre_of_column(U_new_col)
    log_lam = 0.5 * (l0 + lo0 - l1 - lo1)
    if not math.isfinite(log_lam):
        return np.nan, NEG_INF
    z = U_old_col[M]
    zn = (l1 - lo1) + math.exp(log_lam) * (z - (l0 - lo0))
    return zn, log_lam


@_jit
def _centre_of_column(col):
    lomu = log_expit(-col[MU])
    lnum = logaddexp(log_expit(col[DP]), log_expit(col[DD]))
    lden = logaddexp(lomu, lnum)
    return lnum - lden, lomu - lden


@_jit
def update_site_from_prior(f, j, U, hr, hlg, fam_on, rng, with_error, lik_on,
                           t0, t1, sym, L, Z, pll, logs, zeros,
                           new_logs, new_zeros, L_new, Z_new, pll_new, st, buf):
    """Independence proposal from the site's own beta prior.

    Drawn directly on the logit scale, so it reaches rates far closer to 0
    or 1 than a random walk would in reasonable time when g is large. For
    mu, dp and dd the site's m is carried along with its stationary centre
    (as in the joint moves). The proposal density cancels the family prior
    term in the ratio.
    """
    la, lb = site_prior_shapes(f, j, U, hr, hlg)
    if not (math.isfinite(la) and math.isfinite(lb)):
        return 0
    zn = log_gamma_variate(la, rng) - log_gamma_variate(lb, rng)
    if not math.isfinite(zn):
        return 0
    old_col = U[:, j].copy()
    new_col = old_col.copy()
    new_col[f] = zn
    log_jac = 0.0
    if f == MU or f == DP or f == DD:
        zm, jac_m = carry_m(old_col, new_col)
        if not math.isfinite(zm):
            return 0
        new_col[M] = zm
        log_jac = jac_m
    lp_old = site_total_logprior(j, U, hr, hlg, fam_on)
    U[:, j] = new_col
    lp_new = site_total_logprior(j, U, hr, hlg, fam_on)
    dl = 0.0
    if lik_on and lp_new != NEG_INF:
        log_table(site_probs(U, j, with_error), new_logs, new_zeros)
        dl = site_delta(j, t0, t1, sym, L, Z, pll, logs[j], zeros[j], new_logs, new_zeros,
                        L_new, Z_new, pll_new)
    U[:, j] = old_col
    if lp_new == NEG_INF or dl == NEG_INF:
        return 0
    z = old_col[f]
    log_q_new = logit_beta_logpdf(zn, la, lb)
    log_q_old = logit_beta_logpdf(z, la, lb)
    logr = (dl + lp_new - lp_old + log_jac
            - (log_q_new - log_q_old))
    if math.log(rng.random()) < logr:
        U[:, j] = new_col
        if lik_on:
            st[0] = commit(L, Z, pll, L_new, Z_new, pll_new)
            for k in range(4):
                logs[j, k] = new_logs[k]
                zeros[j, k] = new_zeros[k]
        st[1] += lp_new - lp_old
        return 1
    return 0


@_jit
def hyper_log_accept(kind, k, v_new, U, hr, hlg, rub):
    """Log acceptance ratio for a family mean (kind 0) or log10 g (kind 1) move."""
    if kind == 0:
        if not (v_new > 0.0 and v_new < rub[k]):
            return NEG_INF, 0.0
    else:
        if not (v_new > LG_LO and v_new < LG_HI):
            return NEG_INF, 0.0
    if k == G_M:
        old = m_family_logprior(U, hlg[G_M])
        new = m_family_logprior(U, v_new)
    else:
        f = (MU, DP, DD, B, C)[k]
        old = family_logprior(f, U, hr[k], hlg[k])
        if kind == 0:
            new = family_logprior(f, U, v_new, hlg[k])
        else:
            new = family_logprior(f, U, hr[k], v_new)
    if new == NEG_INF:
        return NEG_INF, 0.0
    return new - old, new - old


@_jit
def update_hyper(kind, k, U, hr, hlg, rub, scale, rng, st):
    cur = hr[k] if kind == 0 else hlg[k]
    v_new = cur + scale * rng.standard_normal()
    logr, dlp = hyper_log_accept(kind, k, v_new, U, hr, hlg, rub)
    if math.log(rng.random()) < logr:
        if kind == 0:
            hr[k] = v_new
        else:
            hlg[k] = v_new
        st[1] += dlp
        return 1
    return 0


@_jit
def _family_of(k):
    if k == G_M:
        return M
    return (MU, DP, DD, B, C)[k]


@_jit
def _centre_logit(U, j):
    lrm, lorm = site_centre(U, j)
    return lrm - lorm


@_jit
def joint_log_accept(kind, k, v_new, U, hr, hlg, fam_on, rub, with_error, lik_on,
                     t0, t1, sym, U_new, logs_new, zeros_new, L_new, Z_new, pll_new, st, out):
    """Log acceptance ratio for moving a hyperparameter together with its sites.

    kind 0 (family mean ``r``): site logits are shifted and rescaled so that
    their offset from logit(r), in units of the approximate logit-scale
    spread ``sqrt(g / (r (1 - r)))``, is unchanged. The proposal for r
    itself is a walk on logit(r / upper) (see ``update_joint``), whose
    Jacobian against the uniform hyperprior is included here.
    kind 1 (log10 g): site logits are rescaled about the family centre by
    ``sqrt(g' / g)``; for m the centre is each site's stationary density.
    Moves of mu, dp or dd shift those stationary densities, so m_j is carried
    along, keeping its scaled logit offset from the centre.

    For a given proposed hyperparameter the site map is deterministic and
    invertible, so the ratio includes its Jacobian. The candidate state is
    left in ``U_new`` and, when the likelihood is on, the candidate cache in
    the ``*_new`` buffers. ``out`` receives the new log-likelihood and log-prior.
    """
    f = _family_of(k)
    s = U.shape[1]
    if kind == 0:
        cur = hr[k]
        if not (v_new > 0.0 and v_new < rub[k]):
            return NEG_INF
        lam = math.sqrt(cur * (1.0 - cur) / (v_new * (1.0 - v_new)))
        zc_old = logit(cur)
        zc_new = logit(v_new)
        u = rub[k]
        hyper_jac = log_jacobian(logit(v_new / u)) - log_jacobian(logit(cur / u))
    else:
        cur = hlg[k]
        if not (v_new > LG_LO and v_new < LG_HI):
            return NEG_INF
        lam = 10.0 ** (0.5 * (v_new - cur))
        hyper_jac = 0.0
        zc_old = 0.0
        zc_new = 0.0
        if k != G_M:
            zc_old = logit(hr[k])
            zc_new = zc_old
    U_new[:, :] = U
    log_jac = hyper_jac
    for j in range(s):
        if k == G_M:
            zc_old = _centre_logit(U, j)
            if not math.isfinite(zc_old):
                return NEG_INF
            zc_new = zc_old
        z = U[f, j]
        zn = zc_new + lam * (z - zc_old)
        if not math.isfinite(zn):
            return NEG_INF
        U_new[f, j] = zn
        log_jac += math.log(lam)
    if f == MU or f == DP or f == DD:
        for j in range(s):
            zn, jac_m = carry_m(U[:, j], U_new[:, j])
            if not math.isfinite(zn):
                return NEG_INF
            U_new[M, j] = zn
            log_jac += jac_m
    lp_old = cold_logprior(U, hr, hlg, fam_on, rub)
    if kind == 0:
        hr[k] = v_new
    else:
        hlg[k] = v_new
    lp_new = cold_logprior(U_new, hr, hlg, fam_on, rub)
    if kind == 0:
        hr[k] = cur
    else:
        hlg[k] = cur
    ll_new = 0.0
    if lik_on:
        ll_new = cold_loglik(U_new, with_error, t0, t1, sym, logs_new, zeros_new,
                             L_new, Z_new, pll_new)
    out[0] = ll_new
    out[1] = lp_new
    if lp_new == NEG_INF or ll_new == NEG_INF:
        return NEG_INF
    return (ll_new - st[0]) + (lp_new - lp_old) + log_jac


@_jit
def update_joint(kind, k, U, hr, hlg, fam_on, rub, scale, rng, with_error, lik_on,
                 t0, t1, sym, L, Z, pll, logs, zeros,
                 U_new, logs_new, zeros_new, L_new, Z_new, pll_new, st, buf):
    if kind == 0:
        u = rub[k]
        v_new = u * expit(logit(hr[k] / u) + scale * rng.standard_normal())
    else:
        v_new = hlg[k] + scale * rng.standard_normal()
    logr = joint_log_accept(kind, k, v_new, U, hr, hlg, fam_on, rub, with_error, lik_on,
                            t0, t1, sym, U_new, logs_new, zeros_new, L_new, Z_new, pll_new,
                            st, buf)
    if math.log(rng.random()) < logr:
        U[:, :] = U_new
        if kind == 0:
            hr[k] = v_new
        else:
            hlg[k] = v_new
        if lik_on:
            logs[:, :] = logs_new
            zeros[:, :] = zeros_new
            L[:, :] = L_new
            Z[:, :] = Z_new
            pll[:] = pll_new
        st[0] = buf[0]
        st[1] = buf[1]
        return 1
    return 0


@_jit
def sweep(U, hr, hlg, fam_on, rub, site_scale, r_scale, g_scale,
          site_acc, r_acc, g_acc, prior_acc, randomized, rng, with_error, lik_on,
          t0, t1, sym, L, Z, pll, logs, zeros,
          new_logs, new_zeros, L_new, Z_new, pll_new, st):
    """One full cycle: every sampled site rate (random walk, then a draw from
    its prior), then every hyperparameter (plain, then joint)."""
    s = U.shape[1]
    buf = np.empty(2)
    if randomized:
        order = rng.permutation(s)
    else:
        order = np.arange(s)
    for jj in range(s):
        j = order[jj]
        for f in (MU, DP, DD, M, C, B):
            if fam_on[f] == 0:
                continue
            site_acc[f, j] += update_site(
                f, j, U, hr, hlg, site_scale[f, j], rng, with_error, lik_on,
                t0, t1, sym, L, Z, pll, logs, zeros,
                new_logs, new_zeros, L_new, Z_new, pll_new, st, buf)
            prior_acc[f] += update_site_from_prior(
                f, j, U, hr, hlg, fam_on, rng, with_error, lik_on,
                t0, t1, sym, L, Z, pll, logs, zeros,
                new_logs, new_zeros, L_new, Z_new, pll_new, st, buf)
    U_new = np.empty_like(U)
    logs_new = np.empty_like(logs)
    zeros_new = np.empty_like(zeros)
    for f in (MU, DP, DD, C, B, M):
        if fam_on[f] == 0:
            continue
        k = HYPER_OF[f] if f != M else G_M
        if f != M:
            r_acc[0, k] += update_hyper(0, k, U, hr, hlg, rub, r_scale[0, k], rng, st)
            r_acc[1, k] += update_joint(0, k, U, hr, hlg, fam_on, rub, r_scale[1, k], rng,
                                        with_error, lik_on, t0, t1, sym, L, Z, pll, logs, zeros,
                                        U_new, logs_new, zeros_new, L_new, Z_new, pll_new, st, buf)
        g_acc[0, k] += update_hyper(1, k, U, hr, hlg, rub, g_scale[0, k], rng, st)
        g_acc[1, k] += update_joint(1, k, U, hr, hlg, fam_on, rub, g_scale[1, k], rng,
                                    with_error, lik_on, t0, t1, sym, L, Z, pll, logs, zeros,
                                    U_new, logs_new, zeros_new, L_new, Z_new, pll_new, st, buf)


@_jit
def adapt_scales(scale, accepted, tries, target, batch_index):
    """Robbins-Monro step on log scale toward the target acceptance rate.

    ``scale`` and ``accepted`` are flat views of matching shape; ``tries`` is
    the number of proposals each entry received in the batch.
    """
    if tries <= 0:
        return
    gamma = 1.0 / math.sqrt(max(batch_index, 1))
    lo, hi = SCALE_BOUNDS
    for i in range(scale.size):
        rate = accepted[i] / tries
        v = scale[i] * math.exp(gamma * (rate - target))
        scale[i] = min(max(v, lo), hi)


@_jit
def run(n_iter, n_burn, thin, adapt, batch, target, audit_every, randomized,
        U, hr, hlg, fam_on, rub, site_scale, r_scale, g_scale,
        rng, with_error, lik_on, t0, t1, sym, draws, trace, acc_site, acc_r, acc_g, acc_prior):
    """Run ``n_iter`` sweeps; returns the largest cache drift seen at audits.

    Retained rows hold the six site-rate blocks (as rates, not logits), the
    five family means, the six log10 g values, the log-likelihood and the
    log-posterior.
    """
    s = U.shape[1]
    n = t0.shape[0]
    logs = np.empty((s, 4))
    zeros = np.empty((s, 4), dtype=np.int64)
    L = np.empty((n, 2))
    Z = np.empty((n, 2), dtype=np.int64)
    pll = np.empty(n)
    new_logs = np.empty(4)
    new_zeros = np.empty(4, dtype=np.int64)
    L_new = np.empty((n, 2))
    Z_new = np.empty((n, 2), dtype=np.int64)
    pll_new = np.empty(n)
    st = np.zeros(2)
    if lik_on:
        st[0] = cold_loglik(U, with_error, t0, t1, sym, logs, zeros, L, Z, pll)
    st[1] = cold_logprior(U, hr, hlg, fam_on, rub)

    b_site = np.zeros((6, s))
    b_r = np.zeros((2, 5))
    b_g = np.zeros((2, 6))
    b_prior = np.zeros(6)
    n_batch = 0
    drift = 0.0
    kept = 0
    for t in range(n_iter):
        sweep(U, hr, hlg, fam_on, rub, site_scale, r_scale, g_scale,
              b_site, b_r, b_g, b_prior, randomized, rng, with_error, lik_on,
              t0, t1, sym, L, Z, pll, logs, zeros,
              new_logs, new_zeros, L_new, Z_new, pll_new, st)
        if t >= n_burn:
            acc_site += b_site
            acc_r += b_r
            acc_g += b_g
            acc_prior += b_prior
            b_site[:] = 0.0
            b_r[:] = 0.0
            b_g[:] = 0.0
            b_prior[:] = 0.0
        elif (t + 1) % batch == 0:
            if adapt:
                n_batch += 1
                adapt_scales(site_scale.reshape(-1), b_site.reshape(-1), batch, target, n_batch)
                adapt_scales(r_scale.reshape(-1), b_r.reshape(-1), batch, target, n_batch)
                adapt_scales(g_scale.reshape(-1), b_g.reshape(-1), batch, target, n_batch)
            b_site[:] = 0.0
            b_r[:] = 0.0
            b_g[:] = 0.0
            b_prior[:] = 0.0
        if audit_every > 0 and (t + 1) % audit_every == 0:
            ll = 0.0
            if lik_on:
                ll = cold_loglik(U, with_error, t0, t1, sym, logs, zeros, L, Z, pll)
            lp = cold_logprior(U, hr, hlg, fam_on, rub)
            d = max(abs(ll - st[0]), abs(lp - st[1]))
            if d > drift:
                drift = d
            st[0] = ll
            st[1] = lp
        trace[t] = st[0] + st[1] - logit_jacobian_total(U, fam_on)
        if t >= n_burn and (t - n_burn + 1) % thin == 0:
            row = draws[kept]
            c = 0
            for f in range(6):
                for j in range(s):
                    row[c] = expit(U[f, j])
                    c += 1
            for k in range(5):
                row[c] = hr[k]
                c += 1
            for k in range(6):
                row[c] = hlg[k]
                c += 1
            row[c] = st[0]
            row[c + 1] = trace[t]
            kept += 1
    return drift


# ---------------------------------------------------------------------------
# Shared-rate (non-hierarchical) model: one value of each rate for all sites.


@_jit
def shared_loglik(theta, with_error, c0, c1, sym):
    tab = site_table(theta[MU], theta[DP], theta[DD], theta[M], theta[B], theta[C], with_error)
    logs = np.empty(4)
    zeros = np.empty(4, dtype=np.int64)
    log_table(tab, logs, zeros)
    total = 0.0
    for i in range(c0.shape[0]):
        l0 = 0.0
        l1 = 0.0
        z0 = 0
        z1 = 0
        for k in range(4):
            if c0[i, k] > 0:
                l0 += c0[i, k] * logs[k]
                z0 += zeros[k]
            if c1[i, k] > 0:
                l1 += c1[i, k] * logs[k]
                z1 += zeros[k]
        total += _combine(l0, z0, l1, z1, sym[i])
    return total


@_jit
def _combine(l0, z0, l1, z1, sym):
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
def shared_run(n_iter, n_burn, thin, adapt, batch, target, theta, fam_on, upper,
               scale, rng, with_error, lik_on, c0, c1, sym, draws, trace, acc):
    """Random-walk Metropolis on each shared rate under uniform priors on (0, upper)."""
    ll = shared_loglik(theta, with_error, c0, c1, sym) if lik_on else 0.0
    b_acc = np.zeros(6)
    n_batch = 0
    kept = 0
    for t in range(n_iter):
        for f in (MU, DP, DD, M, C, B):
            if fam_on[f] == 0:
                continue
            x = theta[f]
            # logit walk on x / upper keeps the move inside (0, upper)
            u = x / upper[f]
            z = math.log(u) - math.log1p(-u) + scale[f] * rng.standard_normal()
            un = expit(z)
            if not (un > 0.0 and un < 1.0):
                continue
            xn = un * upper[f]
            theta[f] = xn
            ll_new = shared_loglik(theta, with_error, c0, c1, sym) if lik_on else 0.0
            log_jac = math.log(un) + math.log1p(-un) - math.log(u) - math.log1p(-u)
            logr = ll_new - ll + log_jac
            if ll_new != NEG_INF and math.log(rng.random()) < logr:
                ll = ll_new
                b_acc[f] += 1.0
            else:
                theta[f] = x
        if t >= n_burn:
            acc += b_acc
            b_acc[:] = 0.0
        elif (t + 1) % batch == 0:
            if adapt:
                n_batch += 1
                adapt_scales(scale, b_acc, batch, target, n_batch)
            b_acc[:] = 0.0
        trace[t] = ll
        if t >= n_burn and (t - n_burn + 1) % thin == 0:
            for f in range(6):
                draws[kept, f] = theta[f]
            draws[kept, 6] = ll
            draws[kept, 7] = ll
            kept += 1
