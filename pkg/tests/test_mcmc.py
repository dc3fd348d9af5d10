import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from methfid.core import BMode, HyperParams, SiteRates
from methfid.errors import ConfigError, DimensionError, InvalidParameterError
from methfid.hierarchy import rg_to_alphabeta, stationary_rm
from methfid.mcmc import (
    ChainConfig,
    ModelState,
    adapt_step_sizes,
    audit_state,
    hyper_balance,
    initial_state,
    joint_balance,
    log_posterior,
    metropolis_balance,
    run_chain,
    run_single_chain,
    sweep,
)

SHORT = ChainConfig(n_iterations=400, thin=4, n_chains=2, seed=5, audit_every=50)


def _state(data, cfg, seed=0):
    return initial_state(data, cfg, np.random.default_rng(seed))


def test_config_problems_are_aggregated():
    with pytest.raises(ConfigError) as err:
        ChainConfig(n_iterations=0, thin=0, target_accept=1.5)
    assert len(err.value.problems) == 3


def test_config_derived_counts():
    cfg = ChainConfig(n_iterations=1000, burn_in_fraction=0.2, thin=10)
    assert (cfg.n_burn, cfg.n_keep) == (200, 80)
    assert ChainConfig(b_mode="hierarchical").b_mode is BMode.HIERARCHICAL
    ne = cfg.no_error()
    assert not ne.with_error and ne.fixed_b == 0.0


def test_same_seed_same_draws(small_data):
    a = run_chain(small_data, SHORT)
    b = run_chain(small_data, SHORT)
    assert np.array_equal(a.draws, b.draws, equal_nan=True)
    c = run_chain(small_data, dataclasses.replace(SHORT, seed=6))
    assert not np.array_equal(a.draws, c.draws, equal_nan=True)


def test_threads_do_not_change_results(small_data):
    a = run_chain(small_data, SHORT)
    b = run_chain(small_data, dataclasses.replace(SHORT, threads=2))
    assert np.array_equal(a.draws, b.draws, equal_nan=True)


def test_output_layout(small_data):
    ps = run_chain(small_data, SHORT)
    s = small_data.n_sites
    assert len(ps) == 2 * SHORT.n_keep
    assert ps.chains() == [0, 1]
    assert ps.site_matrix("mu").shape == (len(ps), s)
    assert "b.1" not in ps
    assert np.all(ps.column("r_b") == 0.003)
    assert np.all(np.isnan(ps.column("g_b")))
    for fam in ("mu", "dp", "dd", "m", "c"):
        # tiny rates may round to 0.0 in double precision
        block = ps.site_matrix(fam)
        assert np.all((block >= 0) & (block <= 1))
    assert np.all(np.isfinite(ps.column("logpost")))


def test_cache_never_drifts(small_data):
    ps = run_chain(small_data, SHORT)
    assert max(ps.meta["cache_drift"].values()) < 1e-8


def test_no_error_run_pins_conversion_rates(small_data):
    ps = run_chain(small_data, SHORT.no_error())
    assert not np.any(ps.site_matrix("c"))
    assert np.all(ps.column("r_c") == 0.0)


def test_hierarchical_b(small_data):
    cfg = dataclasses.replace(SHORT, b_mode=BMode.HIERARCHICAL, n_chains=1)
    ps = run_chain(small_data, cfg)
    assert "b.1" in ps
    assert np.all((ps.column("r_b") > 0) & (ps.column("r_b") < 0.06))


def test_prior_only_needs_a_site_count():
    cfg = dataclasses.replace(SHORT, prior_only=True, n_chains=1)
    ps = run_chain(None, cfg, n_sites=3)
    assert ps.n_sites == 3
    with pytest.raises((ConfigError, DimensionError, ValueError)):
        run_chain(None, cfg)


def test_bad_initial_state(small_data):
    cfg = SHORT
    state = _state(small_data, cfg)
    wrong = ModelState(SiteRates.shared(2, 0.9, 0.1, 0.1, 0.5, 0.003, 0.01),
                       state.hp, 0.0, 0.0)
    with pytest.raises(DimensionError):
        run_single_chain(small_data, cfg, init=wrong)
    rates = state.rates.replace(mu=np.ones(small_data.n_sites))
    with pytest.raises(InvalidParameterError):
        run_single_chain(small_data, cfg, init=ModelState(rates, state.hp, 0.0, 0.0))


def test_sweep_keeps_cached_values_exact(small_data):
    cfg = SHORT
    state = _state(small_data, cfg)
    rng = np.random.default_rng(1)
    for _ in range(5):
        state = sweep(state, small_data, rng, cfg)
    assert audit_state(state, small_data, cfg) < 1e-8


@pytest.mark.parametrize("family,j,value", [("mu", 0, 0.9), ("dp", 2, 0.3), ("m", 1, 0.2),
                                             ("c", 4, 0.05)])
def test_site_move_detailed_balance(small_data, family, j, value):
    state = _state(small_data, SHORT, seed=3)
    lhs, rhs = metropolis_balance(state, small_data, SHORT, family, j, value)
    assert lhs == pytest.approx(rhs, abs=1e-8)


@pytest.mark.parametrize("name,value", [("r_mu", 0.7), ("log10_g_dd", -1.2), ("log10_g_m", -3.1),
                                        ("r_c", 0.02)])
def test_hyper_move_detailed_balance(small_data, name, value):
    state = _state(small_data, SHORT, seed=4)
    lhs, rhs = hyper_balance(state, small_data, SHORT, name, value)
    assert lhs == pytest.approx(rhs, abs=1e-8)


@pytest.mark.parametrize("name,value", [("r_mu", 0.8), ("r_dp", 0.1), ("r_c", 0.01),
                                        ("log10_g_mu", -0.5), ("log10_g_dd", -3.0),
                                        ("log10_g_m", -1.0), ("log10_g_c", -2.5)])
def test_joint_move_is_reversible(small_data, name, value):
    state = _state(small_data, SHORT, seed=5)
    fwd, rev = joint_balance(state, small_data, SHORT, name, value)
    assert math.isfinite(fwd)
    assert fwd + rev == pytest.approx(0.0, abs=1e-7)


def test_adapt_step_sizes_direction():
    out = adapt_step_sizes([1.0, 1.0], [45, 5], 50, 0.44)
    assert out[0] > 1.0 > out[1]


def _exact_prior_state(rng, s):
    """Hyperparameters from the hyperprior and sites from their conditional priors."""
    while True:
        hp = HyperParams(
            r_mu=rng.random(), g_mu=10 ** rng.uniform(-4, 0),
            r_dp=rng.random(), g_dp=10 ** rng.uniform(-4, 0),
            r_dd=rng.random(), g_dd=10 ** rng.uniform(-4, 0),
            r_c=0.06 * rng.random(), g_c=10 ** rng.uniform(-4, 0),
            g_m=10 ** rng.uniform(-4, 0),
        )
        draw = {f: rng.beta(*rg_to_alphabeta(hp.rg(f)), size=s) for f in ("mu", "dp", "dd", "c")}
        if any(np.any((v <= 0) | (v >= 1)) for v in draw.values()):
            continue
        if np.any(1 + draw["dp"] + draw["dd"] - draw["mu"] <= 1e-12):
            continue
        rm = stationary_rm(draw["mu"], draw["dp"], draw["dd"])
        if np.any((rm <= 0) | (rm >= 1)):
            continue
        m = np.array([rng.beta(*rg_to_alphabeta((r, hp.g_m))) for r in rm])
        if np.any((m <= 0) | (m >= 1)):
            continue
        rates = SiteRates(draw["mu"], draw["dp"], draw["dd"], m, np.full(s, 0.003), draw["c"])
        return ModelState(rates, hp, 0.0, 0.0)


def test_kernel_preserves_the_prior():
    # Started from an exact prior draw, any number of sweeps of a correct
    # kernel leaves the distribution unchanged, whatever the mixing speed.
    rng = np.random.default_rng(77)
    cfg = ChainConfig(n_iterations=10, burn_in_fraction=0.0, thin=10, n_chains=1,
                      adapt_during_burnin=False, prior_only=True)
    starts, ends = [], []
    for rep in range(300):
        state = _exact_prior_state(rng, 3)
        ps = run_single_chain(None, dataclasses.replace(cfg, seed=rep), init=state, n_sites=3)
        starts.append([state.hp.r_mu, math.log10(state.hp.g_mu), state.hp.r_c,
                       math.log10(state.hp.g_m)])
        ends.append([ps.column("r_mu")[-1], math.log10(ps.column("g_mu")[-1]),
                     ps.column("r_c")[-1], math.log10(ps.column("g_m")[-1])])
    starts, ends = np.array(starts), np.array(ends)
    for k in range(4):
        assert stats.ks_2samp(starts[:, k], ends[:, k]).pvalue > 1e-3


def test_log_posterior_matches_parts(small_data):
    state = _state(small_data, SHORT)
    ll, lp = log_posterior(state.rates, state.hp, small_data, SHORT)
    assert (ll, lp) == (state.cached_loglik, state.cached_logprior)
    ll0, _ = log_posterior(state.rates, state.hp, small_data,
                           dataclasses.replace(SHORT, prior_only=True))
    assert ll0 == 0.0


def test_shared_model(small_data):
    cfg = dataclasses.replace(SHORT, model="shared")
    ps = run_chain(small_data, cfg)
    assert ps.names == ["mu", "dp", "dd", "m", "b", "c", "logpost"]
    assert np.all(ps.column("b") == 0.003)
    for n in ("mu", "dp", "dd", "m", "c"):
        assert np.all((ps.column(n) > 0) & (ps.column(n) < 1))
    with pytest.raises(ConfigError):
        run_chain(None, cfg, n_sites=3)
