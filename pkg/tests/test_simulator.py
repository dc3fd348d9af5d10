import numpy as np
import pytest

from conftest import REFERENCE_HYPERS
from methfid.core import SiteRates
from methfid.hierarchy import stationary_rm
from methfid.oracle import expected_dyad_fractions
from methfid.simulator import (
    draw_site_rates,
    expected_density_trajectory,
    iterate_generations,
    simulate_dataset,
)

MU, DP, DD = 0.976, 0.08, 0.07


def test_simulation_is_deterministic():
    rates = draw_site_rates(REFERENCE_HYPERS, 5, seed=3)
    assert draw_site_rates(REFERENCE_HYPERS, 5, seed=3) == rates
    a = simulate_dataset(rates, 30, seed=4)
    b = simulate_dataset(rates, 30, seed=4)
    assert a == b
    assert simulate_dataset(rates, 30, seed=5) != a


def test_shapes_and_binary_strands():
    rates = draw_site_rates(REFERENCE_HYPERS, 7, seed=1)
    data = simulate_dataset(rates, 50, seed=2)
    assert (data.n_patterns, data.n_sites) == (50, 7)
    assert set(np.unique(data.x)) <= {0, 1}


def test_no_error_draws_have_zero_error_rates():
    rates = draw_site_rates(REFERENCE_HYPERS, 4, seed=1, with_error=False)
    assert not np.any(rates.b) and not np.any(rates.c)


def test_dyad_fractions_match_expectation():
    m = stationary_rm(MU, DP, DD)
    n_sites, n = 4, 20000
    rates = SiteRates.shared(n_sites, MU, DP, DD, m, b=0.003, c=0.016)
    data = simulate_dataset(rates, n, seed=8)
    got = np.array(data.dyad_fractions())
    want = np.array(expected_dyad_fractions(MU, DP, DD, m, 0.003, 0.016))
    se = np.sqrt(want * (1 - want) / (n * n_sites))
    assert np.all(np.abs(got - want) < 3 * se)


def test_stationary_start_stays_put():
    rm = stationary_rm(MU, DP, DD)
    rates = SiteRates.shared(1, MU, DP, DD, rm)
    traj = iterate_generations(rm, rates, 50, 100_000, seed=9)
    se = np.sqrt(rm * (1 - rm) / 100_000)
    assert np.all(np.abs(traj[:, 0] - rm) < 4 * se)


def test_density_rises_from_zero():
    rates = SiteRates.shared(2, MU, DP, DD, 0.5)
    exact = expected_density_trajectory(0.0, rates, 40)
    assert np.all(np.diff(exact[:, 0]) > 0)
    assert exact[-1, 0] < stationary_rm(MU, DP, DD)
    traj = iterate_generations(0.0, rates, 40, 50_000, seed=10)
    se = np.sqrt(exact * (1 - exact) / 50_000) + 1e-12
    assert np.all(np.abs(traj - exact) < 4 * se)


def test_daughter_lineage_has_different_fixed_point():
    rates = SiteRates.shared(1, MU, DP, DD, 0.5)
    exact = expected_density_trajectory(0.5, rates, 2000, follow="daughter")
    assert exact[-1, 0] == pytest.approx(DD / (1 - MU + DD), abs=1e-9)


def test_argument_checks():
    rates = SiteRates.shared(1, MU, DP, DD, 0.5)
    with pytest.raises(ValueError):
        iterate_generations(0.5, rates, 0, 10, seed=1)
    with pytest.raises(ValueError):
        iterate_generations(0.5, rates, 5, 10, seed=1, follow="parent")
    with pytest.raises(ValueError):
        simulate_dataset(rates, 0, seed=1)
