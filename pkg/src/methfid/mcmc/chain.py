"""Chain configuration, state and the multi-chain driver."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit

from .. import _kernels
from ..core import BMode, HyperParams, SiteRates
from ..errors import ConfigError, DimensionError, InvalidParameterError
from ..hierarchy import HYPER_SUPPORT, log_prior, prior_families, rg_to_alphabeta, stationary_rm
from ..likelihood import Dataset, dataset_loglik
from ..posterior import HYPER_NAMES, PosteriorSamples
from . import _sampler as K

__all__ = [
    "ChainConfig",
    "ModelState",
    "adapt_step_sizes",
    "audit_state",
    "initial_state",
    "log_posterior",
    "metropolis_balance",
    "run_chain",
    "run_single_chain",
    "sweep",
]

_SITE_ORDER = ("mu", "dp", "dd", "m", "b", "c")
_OUT_SITE = ("mu", "dp", "dd", "m", "c")
_SHARED_NAMES = ("mu", "dp", "dd", "m", "b", "c")


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings. Defaults reproduce the long-run protocol (1.44M sweeps,
    20% burn-in, every 2000th draw kept, three chains)."""

    n_iterations: int = 1_440_000
    burn_in_fraction: float = 0.2
    thin: int = 2000
    seed: int = 0
    n_chains: int = 3
    adapt_during_burnin: bool = True
    with_error: bool = True
    b_mode: BMode = BMode.FIXED
    b_value: float = 0.003
    target_accept: float = 0.44
    randomized_scan: bool = False
    adapt_batch: int = 50
    audit_every: int = 1000
    prior_only: bool = False
    model: str = "hierarchical"
    threads: int = 1

    def __post_init__(self):
        problems = []
        if self.n_iterations < 1:
            problems.append("n_iterations must be >= 1")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            problems.append("burn_in_fraction must lie in [0, 1)")
        if self.thin < 1:
            problems.append("thin must be >= 1")
        if self.n_chains < 1:
            problems.append("n_chains must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            problems.append("target_accept must lie in (0, 1)")
        if self.adapt_batch < 1:
            problems.append("adapt_batch must be >= 1")
        if self.model not in ("hierarchical", "shared"):
            problems.append("model must be 'hierarchical' or 'shared'")
        if not 0.0 <= self.b_value <= 1.0:
            problems.append("b_value must lie in [0, 1]")
        if self.threads < 1:
            problems.append("threads must be >= 1")
        if isinstance(self.b_mode, str):
            try:
                object.__setattr__(self, "b_mode", BMode(self.b_mode))
            except ValueError:
                problems.append("b_mode must be 'fixed' or 'hierarchical'")
        if problems:
            raise ConfigError(problems)

    @property
    def n_burn(self) -> int:
        return int(self.burn_in_fraction * self.n_iterations)

    @property
    def n_keep(self) -> int:
        return (self.n_iterations - self.n_burn) // self.thin

    @property
    def fixed_b(self) -> float:
        return self.b_value if self.with_error else 0.0

    def no_error(self) -> "ChainConfig":
        """The same run with both conversion error rates pinned at zero."""
        return replace(self, with_error=False, b_mode=BMode.FIXED, b_value=0.0)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["b_mode"] = self.b_mode.value
        return d


@dataclass
class ModelState:
    rates: SiteRates
    hp: HyperParams
    cached_loglik: float
    cached_logprior: float

    @property
    def log_posterior(self) -> float:
        return self.cached_loglik + self.cached_logprior


def _fam_on(cfg: ChainConfig) -> np.ndarray:
    on = np.array([1, 1, 1, 1, 0, 0], dtype=np.int64)
    if cfg.with_error:
        on[K.C] = 1
        if cfg.b_mode is BMode.HIERARCHICAL:
            on[K.B] = 1
    return on


def _to_logits(rates: SiteRates) -> np.ndarray:
    x = rates.as_array()
    with np.errstate(divide="ignore"):
        return np.log(x) - np.log1p(-x)


def _from_logits(U: np.ndarray) -> SiteRates:
    return SiteRates.from_array(expit(U))


def _rub() -> np.ndarray:
    return np.array([HYPER_SUPPORT[f][1] for f in ("mu", "dp", "dd", "b", "c")])


def _hp_arrays(hp: HyperParams) -> tuple[np.ndarray, np.ndarray]:
    hr = np.array([hp.r_mu, hp.r_dp, hp.r_dd, hp.r_b, hp.r_c])
    hlg = np.log10([hp.g_mu, hp.g_dp, hp.g_dd, hp.g_b, hp.g_c, hp.g_m])
    return hr, hlg


def _hp_from_arrays(hr, hlg, cfg: ChainConfig) -> HyperParams:
    g = 10.0 ** np.asarray(hlg)
    return HyperParams(
        r_mu=hr[0], g_mu=g[0], r_dp=hr[1], g_dp=g[1], r_dd=hr[2], g_dd=g[2],
        r_b=hr[3], g_b=g[3], r_c=hr[4], g_c=g[4], g_m=g[5],
        b_mode=cfg.b_mode, b_value=cfg.fixed_b,
    )


def _codes(data: Dataset | None, n_sites: int):
    if data is None:
        return (np.zeros((0, n_sites), dtype=np.int64), np.zeros((0, n_sites), dtype=np.int64),
                np.zeros(0, dtype=np.bool_))
    return data.site_codes()


def log_posterior(rates: SiteRates, hp: HyperParams, data: Dataset | None,
                  cfg: ChainConfig) -> tuple[float, float]:
    """Cold (log-likelihood, log-prior) for a hierarchical state."""
    hp = replace(hp, b_mode=cfg.b_mode)
    lp = log_prior(rates, hp, cfg.with_error)
    if cfg.prior_only or data is None:
        return 0.0, lp
    return dataset_loglik(data, rates, cfg.with_error), lp


def _n_sites(data: Dataset | None, n_sites: int | None) -> int:
    if data is not None:
        if n_sites is not None and n_sites != data.n_sites:
            raise DimensionError("n_sites disagrees with the dataset")
        return data.n_sites
    if n_sites is None:
        raise ConfigError("prior-only runs without data need n_sites")
    return n_sites


def initial_state(data: Dataset | None, cfg: ChainConfig, rng: np.random.Generator,
                  n_sites: int | None = None) -> ModelState:
    """Random start: hyperparameters at r=0.5, log10 g=-2 (error means at 0.03), sites drawn from the prior."""
    s = _n_sites(data, n_sites)
    hp = HyperParams(r_mu=0.5, g_mu=0.01, r_dp=0.5, g_dp=0.01, r_dd=0.5, g_dd=0.01,
                     r_b=0.03, g_b=0.01, r_c=0.03, g_c=0.01, g_m=0.01,
                     b_mode=cfg.b_mode, b_value=cfg.fixed_b)

    def draw(fam):
        a, b = rg_to_alphabeta(hp.rg(fam))
        return np.clip(rng.beta(a, b, size=s), 1e-6, 1 - 1e-6)

    mu, dp, dd = draw("mu"), draw("dp"), draw("dd")
    rm = np.atleast_1d(stationary_rm(mu, dp, dd))
    m = np.array([np.clip(rng.beta(*rg_to_alphabeta((r, hp.g_m))), 1e-6, 1 - 1e-6) for r in rm])
    if cfg.with_error:
        c = draw("c")
        b = draw("b") if cfg.b_mode is BMode.HIERARCHICAL else np.full(s, cfg.b_value)
    else:
        b = c = np.zeros(s)
    rates = SiteRates(mu, dp, dd, m, b, c)
    ll, lp = log_posterior(rates, hp, data, cfg)
    return ModelState(rates, hp, ll, lp)


def _validate_init(state: ModelState, data, cfg: ChainConfig, s: int):
    if state.rates.n_sites != s:
        raise DimensionError(f"initial state has {state.rates.n_sites} sites, data has {s}")
    on = _fam_on(cfg)
    arr = state.rates.as_array()
    for f, name in enumerate(_SITE_ORDER):
        if on[f] and not np.all((arr[f] > 0) & (arr[f] < 1)):
            raise InvalidParameterError(f"initial {name} rates must lie strictly inside (0, 1)")
    if not cfg.with_error and (np.any(arr[K.B]) or np.any(arr[K.C])):
        raise InvalidParameterError("no-error runs need b = c = 0 in the initial state")
    if cfg.with_error and cfg.b_mode is BMode.FIXED and not np.all(arr[K.B] == cfg.b_value):
        raise InvalidParameterError("fixed-b runs need every initial b_j equal to b_value")
    ll, lp = log_posterior(state.rates, state.hp, data, cfg)
    if not (math.isfinite(ll) and math.isfinite(lp)):
        raise InvalidParameterError("initial state lies outside the support of the posterior")


def _site_names(s: int, hierarchical_b: bool) -> list[str]:
    fams = list(_OUT_SITE) + (["b"] if hierarchical_b else [])
    return [f"{f}.{j + 1}" for f in fams for j in range(s)]


def _draws_to_columns(raw: np.ndarray, s: int, cfg: ChainConfig) -> tuple[np.ndarray, list[str]]:
    hier_b = cfg.with_error and cfg.b_mode is BMode.HIERARCHICAL
    names = _site_names(s, hier_b) + list(HYPER_NAMES) + ["logpost"]
    n = raw.shape[0]
    site = raw[:, : 6 * s].reshape(n, 6, s)
    hr = raw[:, 6 * s: 6 * s + 5]
    g = 10.0 ** raw[:, 6 * s + 5: 6 * s + 11]
    order = [K.MU, K.DP, K.DD, K.M, K.C] + ([K.B] if hier_b else [])
    cols = [site[:, f, :] for f in order]
    hyper = np.column_stack([
        hr[:, 0], g[:, 0], hr[:, 1], g[:, 1], hr[:, 2], g[:, 2],
        hr[:, 3], g[:, 3], hr[:, 4], g[:, 4], g[:, 5],
    ])
    if not hier_b:
        hyper[:, 6] = cfg.fixed_b
        hyper[:, 7] = np.nan
    if not cfg.with_error:
        hyper[:, 8] = 0.0
        hyper[:, 9] = np.nan
    out = np.column_stack(cols + [hyper, raw[:, -1]])
    return out, names


def _acceptance(cfg, acc_site, acc_r, acc_g, acc_prior, tries) -> dict:
    if tries <= 0:
        return {}
    on = _fam_on(cfg)
    out = {}
    for f, name in enumerate(_SITE_ORDER):
        if on[f]:
            out[name] = float(acc_site[f].mean() / tries)
            out[f"prior_draw_{name}"] = float(acc_prior[f] / tries)
    for f, name in enumerate(_SITE_ORDER):
        if f == K.M or not on[f]:
            continue
        k = K.HYPER_OF[f]
        out[f"r_{name}"] = float(acc_r[0, k] / tries)
        out[f"log10_g_{name}"] = float(acc_g[0, k] / tries)
        out[f"joint_r_{name}"] = float(acc_r[1, k] / tries)
        out[f"joint_log10_g_{name}"] = float(acc_g[1, k] / tries)
    out["log10_g_m"] = float(acc_g[0, K.G_M] / tries)
    out["joint_log10_g_m"] = float(acc_g[1, K.G_M] / tries)
    return out


def _chain_rng(cfg: ChainConfig, chain: int) -> np.random.Generator:
    child = np.random.SeedSequence(cfg.seed).spawn(chain + 1)[chain]
    return np.random.Generator(np.random.Philox(child))


def _initial_scales(s: int):
    site = np.full((6, s), 0.5)
    r = np.array([[0.05, 0.05, 0.05, 0.005, 0.005], [0.05, 0.05, 0.05, 0.005, 0.005]])
    g = np.full((2, 6), 0.5)
    return site, r, g


def run_single_chain(data: Dataset | None, cfg: ChainConfig, chain: int = 0, init="random",
                     n_sites: int | None = None) -> PosteriorSamples:
    """Run one chain; the RNG stream is derived from ``cfg.seed`` and ``chain``."""
    if cfg.model == "shared":
        return _run_shared(data, cfg, chain, init)
    s = _n_sites(data, n_sites)
    rng = _chain_rng(cfg, chain)
    if isinstance(init, str):
        if init != "random":
            raise ConfigError(f"unknown init {init!r}")
        state = initial_state(data, cfg, rng, s)
    else:
        state = init
    _validate_init(state, data, cfg, s)

    lik_on = not cfg.prior_only and data is not None
    t0, t1, sym = _codes(data if lik_on else None, s)
    U = _to_logits(state.rates)
    hr, hlg = _hp_arrays(state.hp)
    site_scale, r_scale, g_scale = _initial_scales(s)
    draws = np.empty((cfg.n_keep, 6 * s + 13))
    trace = np.empty(cfg.n_iterations)
    acc_site = np.zeros((6, s))
    acc_r = np.zeros((2, 5))
    acc_g = np.zeros((2, 6))
    acc_prior = np.zeros(6)
    start = time.perf_counter()
    drift = K.run(
        cfg.n_iterations, cfg.n_burn, cfg.thin, cfg.adapt_during_burnin, cfg.adapt_batch,
        cfg.target_accept, cfg.audit_every, cfg.randomized_scan,
        U, hr, hlg, _fam_on(cfg), _rub(), site_scale, r_scale, g_scale,
        rng, cfg.with_error, lik_on, t0, t1, sym, draws, trace, acc_site, acc_r, acc_g, acc_prior,
    )
    elapsed = time.perf_counter() - start
    cols, names = _draws_to_columns(draws, s, cfg)
    tries = cfg.n_iterations - cfg.n_burn
    acc = _acceptance(cfg, acc_site, acc_r, acc_g, acc_prior / s, tries)
    final = _from_logits(U)
    return PosteriorSamples(
        cols, names, np.full(cols.shape[0], chain), cfg.as_dict(),
        traces={chain: trace}, acceptance={chain: acc},
        meta={"cache_drift": {chain: float(drift)}, "wall_clock": {chain: elapsed},
              "final_state": {chain: (final, _hp_from_arrays(hr, hlg, cfg))},
              "scales": {chain: (site_scale, r_scale, g_scale)}},
    )


def _shared_counts(data: Dataset):
    t0, t1, sym = data.site_codes()
    c0 = np.stack([(t0 == k).sum(axis=1) for k in range(4)], axis=1).astype(np.float64)
    c1 = np.stack([(t1 == k).sum(axis=1) for k in range(4)], axis=1).astype(np.float64)
    return c0, c1, sym


def _run_shared(data, cfg: ChainConfig, chain: int, init) -> PosteriorSamples:
    """Non-hierarchical fit: one value per rate for all sites, uniform priors."""
    if data is None:
        raise ConfigError("the shared-rate model needs data")
    rng = _chain_rng(cfg, chain)
    on = _fam_on(cfg)
    upper = np.ones(6)
    if isinstance(init, str):
        theta = np.array([rng.uniform(0.5, 0.99), rng.uniform(0.01, 0.3), rng.uniform(0.01, 0.3),
                          rng.uniform(0.2, 0.8), 0.0, 0.0])
        if cfg.with_error:
            theta[K.C] = rng.uniform(0.005, 0.05)
            theta[K.B] = rng.uniform(0.001, 0.01) if on[K.B] else cfg.b_value
    else:
        theta = np.array([init[k] for k in _SHARED_NAMES], dtype=float)
    c0, c1, sym = _shared_counts(data)
    lik_on = not cfg.prior_only
    draws = np.empty((cfg.n_keep, 8))
    trace = np.empty(cfg.n_iterations)
    acc = np.zeros(6)
    scale = np.full(6, 0.3)
    start = time.perf_counter()
    K.shared_run(cfg.n_iterations, cfg.n_burn, cfg.thin, cfg.adapt_during_burnin,
                 cfg.adapt_batch, cfg.target_accept, theta, on, upper, scale, rng,
                 cfg.with_error, lik_on, c0, c1, sym, draws, trace, acc)
    elapsed = time.perf_counter() - start
    tries = cfg.n_iterations - cfg.n_burn
    rates = {n: float(acc[f] / tries) for f, n in enumerate(_SHARED_NAMES) if on[f] and tries}
    cols = np.column_stack([draws[:, :6], draws[:, 7]])
    return PosteriorSamples(
        cols, list(_SHARED_NAMES) + ["logpost"], np.full(cols.shape[0], chain), cfg.as_dict(),
        traces={chain: trace}, acceptance={chain: rates},
        meta={"wall_clock": {chain: elapsed}},
    )


def run_chain(data: Dataset | None, cfg: ChainConfig, init="random",
              n_sites: int | None = None) -> PosteriorSamples:
    """Run ``cfg.n_chains`` independent chains and pool their retained draws.

    Chains share nothing but the data. With ``cfg.threads > 1`` they run on a
    thread pool; the compiled kernels release the GIL and results are
    assembled in chain order, so output does not depend on scheduling.
    ``init`` is "random" or one ``ModelState`` (or list of them, one per chain).
    """
    inits = init if isinstance(init, (list, tuple)) else [init] * cfg.n_chains
    if len(inits) != cfg.n_chains:
        raise ConfigError("need one initial state per chain")

    def one(k):
        return run_single_chain(data, cfg, k, inits[k], n_sites)

    if cfg.threads > 1 and cfg.n_chains > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(one, range(cfg.n_chains)))
    else:
        parts = [one(k) for k in range(cfg.n_chains)]
    pooled = PosteriorSamples.concat(parts)
    meta = {}
    for p in parts:
        for key, val in p.meta.items():
            meta.setdefault(key, {}).update(val)
    pooled.meta = meta
    return pooled


class _Workspace:
    """Arrays for driving the compiled kernels on a single state from Python."""

    def __init__(self, state: ModelState, data: Dataset | None, cfg: ChainConfig):
        s = state.rates.n_sites
        self.cfg = cfg
        self.lik_on = not cfg.prior_only and data is not None
        self.t0, self.t1, self.sym = _codes(data if self.lik_on else None, s)
        n = self.t0.shape[0]
        self.U = _to_logits(state.rates)
        self.hr, self.hlg = _hp_arrays(state.hp)
        self.logs = np.empty((s, 4))
        self.zeros = np.empty((s, 4), dtype=np.int64)
        self.L = np.empty((n, 2))
        self.Z = np.empty((n, 2), dtype=np.int64)
        self.pll = np.empty(n)
        self.new_logs = np.empty(4)
        self.new_zeros = np.empty(4, dtype=np.int64)
        self.L_new = np.empty((n, 2))
        self.Z_new = np.empty((n, 2), dtype=np.int64)
        self.pll_new = np.empty(n)
        # the kernels cache the prior density of the logits
        self.jac = K.logit_jacobian_total(self.U, _fam_on(cfg))
        self.st = np.array([state.cached_loglik, state.cached_logprior + self.jac])
        if self.lik_on:
            K.cold_loglik(self.U, cfg.with_error, self.t0, self.t1, self.sym,
                          self.logs, self.zeros, self.L, self.Z, self.pll)

    def state(self) -> ModelState:
        jac = K.logit_jacobian_total(self.U, _fam_on(self.cfg))
        return ModelState(_from_logits(self.U), _hp_from_arrays(self.hr, self.hlg, self.cfg),
                          float(self.st[0]), float(self.st[1] - jac))

    def site_log_accept(self, f: int, j: int, xn: float) -> float:
        """Acceptance log-ratio for moving rate (f, j) to ``xn`` (given as a rate)."""
        buf = np.empty(2)
        zn = math.log(xn) - math.log1p(-xn)
        return K.site_log_accept(f, j, zn, self.U, self.hr, self.hlg, self.cfg.with_error,
                                 self.lik_on, self.t0, self.t1, self.sym, self.L, self.Z,
                                 self.pll, self.logs, self.zeros, self.new_logs, self.new_zeros,
                                 self.L_new, self.Z_new, self.pll_new, buf)


def sweep(state: ModelState, data: Dataset | None, rng: np.random.Generator,
          cfg: ChainConfig = ChainConfig(), scales=None) -> ModelState:
    """Apply one full update cycle and return the new state.

    The input state is not modified. ``scales`` is ``(site, r, g)`` as used by
    the compiled sampler; defaults are the pre-adaptation values.
    """
    ws = _Workspace(state, data, cfg)
    s = state.rates.n_sites
    if scales is None:
        scales = _initial_scales(s)
    site_scale, r_scale, g_scale = (np.array(a, dtype=float) for a in scales)
    K.sweep(ws.U, ws.hr, ws.hlg, _fam_on(cfg), _rub(), site_scale, r_scale, g_scale,
            np.zeros((6, s)), np.zeros((2, 5)), np.zeros((2, 6)), np.zeros(6), cfg.randomized_scan, rng,
            cfg.with_error, ws.lik_on, ws.t0, ws.t1, ws.sym, ws.L, ws.Z, ws.pll,
            ws.logs, ws.zeros, ws.new_logs, ws.new_zeros, ws.L_new, ws.Z_new, ws.pll_new, ws.st)
    return ws.state()


def adapt_step_sizes(scales, accepted, tries: int, target_accept: float = 0.44,
                     batch_index: int = 1) -> np.ndarray:
    """Return proposal scales nudged toward ``target_accept``.

    ``accepted`` counts acceptances per scale over a batch of ``tries``
    proposals each. Scales grow when the batch acceptance rate exceeds the
    target and shrink when it falls short; the step size decays as
    ``1/sqrt(batch_index)``.
    """
    out = np.array(scales, dtype=float).ravel().copy()
    K.adapt_scales(out, np.asarray(accepted, dtype=float).ravel(), tries, target_accept,
                   batch_index)
    return out.reshape(np.shape(scales))


def audit_state(state: ModelState, data: Dataset | None, cfg: ChainConfig) -> float:
    """Largest gap between the cached log-likelihood / log-prior and a cold recomputation."""
    ll, lp = log_posterior(state.rates, state.hp, data, cfg)
    return max(abs(ll - state.cached_loglik), abs(lp - state.cached_logprior))


def _logit_rw_logq(x_from: float, x_to: float, scale: float) -> float:
    """Log density, in x-space, of reaching ``x_to`` from ``x_from`` by a logit random walk."""
    z0 = math.log(x_from / (1 - x_from))
    z1 = math.log(x_to / (1 - x_to))
    return (-0.5 * ((z1 - z0) / scale) ** 2 - math.log(scale * math.sqrt(2 * math.pi))
            - math.log(x_to * (1 - x_to)))


def metropolis_balance(state: ModelState, data: Dataset | None, cfg: ChainConfig,
                       family: str, j: int, new_value: float, scale: float = 0.5):
    """Both sides of the detailed-balance identity for a single-site move.

    Returns ``(log a(s->s') + log pi(s) + log q(s->s'), log a(s'->s) + log pi(s') + log q(s'->s))``
    where ``a`` is the acceptance probability computed by the sampler's
    incremental path and ``pi`` is the cold log posterior.
    """
    f = _SITE_ORDER.index(family)
    fwd_ws = _Workspace(state, data, cfg)
    x = state.rates.as_array()[f, j]
    log_a_fwd = min(0.0, fwd_ws.site_log_accept(f, j, new_value))
    arr = state.rates.as_array()
    arr[f, j] = new_value
    rates_new = SiteRates.from_array(arr)
    ll, lp = log_posterior(rates_new, state.hp, data, cfg)
    new_state = ModelState(rates_new, state.hp, ll, lp)
    rev_ws = _Workspace(new_state, data, cfg)
    log_a_rev = min(0.0, rev_ws.site_log_accept(f, j, x))
    pi_old = sum(log_posterior(state.rates, state.hp, data, cfg))
    pi_new = ll + lp
    lhs = log_a_fwd + pi_old + _logit_rw_logq(x, new_value, scale)
    rhs = log_a_rev + pi_new + _logit_rw_logq(new_value, x, scale)
    return lhs, rhs


def hyper_balance(state: ModelState, data: Dataset | None, cfg: ChainConfig,
                  name: str, new_value: float):
    """Detailed-balance sides for a hyperparameter move (symmetric proposal).

    ``name`` is ``r_<family>`` or ``log10_g_<family>``.
    """
    ws = _Workspace(state, data, cfg)
    kind = 0 if name.startswith("r_") else 1
    fam = name.split("_")[-1]
    k = 5 if fam == "m" else ("mu", "dp", "dd", "b", "c").index(fam)
    cur = ws.hr[k] if kind == 0 else ws.hlg[k]
    logr_fwd, _ = K.hyper_log_accept(kind, k, new_value, ws.U, ws.hr, ws.hlg, _rub())
    if kind == 0:
        ws.hr[k] = new_value
    else:
        ws.hlg[k] = new_value
    logr_rev, _ = K.hyper_log_accept(kind, k, cur, ws.U, ws.hr, ws.hlg, _rub())
    new_hp = _hp_from_arrays(ws.hr, ws.hlg, cfg)
    pi_old = sum(log_posterior(state.rates, state.hp, data, cfg))
    pi_new = sum(log_posterior(state.rates, new_hp, data, cfg))
    return min(0.0, logr_fwd) + pi_old, min(0.0, logr_rev) + pi_new


def joint_balance(state: ModelState, data: Dataset | None, cfg: ChainConfig,
                  name: str, new_value: float) -> tuple[float, float]:
    """Forward and reverse log acceptance ratios of a joint hyperparameter move.

    The joint moves are deterministic given the proposed hyperparameter, so
    detailed balance holds exactly when the two ratios sum to zero. The
    reverse ratio is computed from the proposed state, moving back to the
    current value.
    """
    kind = 0 if name.startswith("r_") else 1
    fam = name.split("_")[-1]
    k = 5 if fam == "m" else ("mu", "dp", "dd", "b", "c").index(fam)

    def ratio(ws, v):
        n = ws.t0.shape[0]
        s = ws.U.shape[1]
        buf = np.empty(2)
        U_new = np.empty_like(ws.U)
        logr = K.joint_log_accept(
            kind, k, v, ws.U, ws.hr, ws.hlg, _fam_on(cfg), _rub(), cfg.with_error, ws.lik_on,
            ws.t0, ws.t1, ws.sym, U_new, np.empty((s, 4)), np.empty((s, 4), dtype=np.int64),
            np.empty((n, 2)), np.empty((n, 2), dtype=np.int64), np.empty(n), ws.st, buf)
        return logr, U_new

    fwd = _Workspace(state, data, cfg)
    cur = fwd.hr[k] if kind == 0 else fwd.hlg[k]
    logr_fwd, U_new = ratio(fwd, new_value)
    hr, hlg = fwd.hr.copy(), fwd.hlg.copy()
    if kind == 0:
        hr[k] = new_value
    else:
        hlg[k] = new_value
    rates_new = _from_logits(U_new)
    hp_new = _hp_from_arrays(hr, hlg, cfg)
    new_state = ModelState(rates_new, hp_new, *log_posterior(rates_new, hp_new, data, cfg))
    logr_rev, _ = ratio(_Workspace(new_state, data, cfg), cur)
    return float(logr_fwd), float(logr_rev)
