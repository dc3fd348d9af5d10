import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from methfid.core import (
    BMode,
    HyperParams,
    LatentTriple,
    MethylationPattern,
    SiteRates,
    error_prob,
    event_prob,
    single_site_joint,
    site_joint_table,
)
from methfid.errors import InvalidParameterError

unit = st.floats(0.0, 1.0)


def test_transition_rows_sum_to_one():
    for p in (0, 1):
        total = sum(event_prob(q, d, p, 0.9, 0.2, 0.3) for q in (0, 1) for d in (0, 1))
        assert total == pytest.approx(1.0, abs=1e-15)


def test_methylated_parent_never_loses_mark():
    assert event_prob(0, 0, 1, 0.5, 0.5, 0.5) == 0.0
    assert event_prob(0, 1, 1, 0.5, 0.5, 0.5) == 0.0


def test_named_events():
    mu, dp, dd = 0.95, 0.1, 0.2
    assert event_prob(1, 1, 1, mu, dp, dd) == mu
    assert event_prob(1, 0, 1, mu, dp, dd) == pytest.approx(1 - mu)
    assert event_prob(1, 0, 0, mu, dp, dd) == pytest.approx(dp * (1 - dd))
    assert event_prob(0, 1, 0, mu, dp, dd) == pytest.approx((1 - dp) * dd)


def test_error_prob_columns_sum_to_one():
    for truth in (0, 1):
        assert error_prob(0, truth, 0.01, 0.05) + error_prob(1, truth, 0.01, 0.05) == 1.0
    assert error_prob(1, 0, 0.01, 0.05) == 0.01
    assert error_prob(0, 1, 0.01, 0.05) == 0.05


def test_latent_triples():
    valid = LatentTriple.all_valid()
    assert len(valid) == 6
    with pytest.raises(ValueError):
        LatentTriple(1, 0, 1)


def test_pattern_is_unordered():
    a = MethylationPattern.from_strings("110", "100")
    b = MethylationPattern.from_strings("100", "110")
    assert a == b
    assert hash(a) == hash(b)
    assert a.swapped().strings() == ("100", "110")
    assert not a.symmetric
    assert MethylationPattern.from_strings("101", "101").symmetric


def test_pattern_rejects_bad_strands():
    with pytest.raises(ValueError):
        MethylationPattern.from_strings("102", "100")
    with pytest.raises(ValueError):
        MethylationPattern.from_strings("", "")


def test_site_rates_broadcast_and_validate():
    r = SiteRates([0.9, 0.8], 0.1, 0.1, 0.5, 0.0, 0.01)
    assert r.n_sites == 2
    np.testing.assert_array_equal(r.delta_p, [0.1, 0.1])
    assert SiteRates.from_array(r.as_array()) == r
    with pytest.raises(InvalidParameterError):
        SiteRates([0.9, 1.2], 0.1, 0.1, 0.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        SiteRates([0.9, 0.8], [0.1, 0.1, 0.1], 0.1, 0.5, 0.0, 0.0)


def test_without_error_zeroes_b_and_c():
    r = SiteRates.shared(3, 0.9, 0.1, 0.1, 0.5, 0.01, 0.02).without_error()
    assert np.all(r.b == 0) and np.all(r.c == 0)


def test_hyperparams_validation():
    HyperParams(b_mode=BMode.HIERARCHICAL)
    with pytest.raises(InvalidParameterError):
        HyperParams(g_mu=0.0)
    with pytest.raises(InvalidParameterError):
        HyperParams(r_c=1.0)


def test_site_table_matches_loops(rng):
    rates = SiteRates(*rng.uniform(0.01, 0.99, size=(4, 5)), rng.uniform(0, 0.1, 5),
                      rng.uniform(0, 0.1, 5))
    for with_error in (True, False):
        tab = site_joint_table(rates, with_error)
        for j, x, y in itertools.product(range(5), (0, 1), (0, 1)):
            assert tab[j, x, y] == pytest.approx(single_site_joint(x, y, j, rates, with_error),
                                                 rel=1e-13)


def test_single_site_index_checked():
    with pytest.raises(IndexError):
        single_site_joint(0, 0, 3, SiteRates.shared(2, 0.9, 0.1, 0.1, 0.5))


@settings(max_examples=200, deadline=None)
@given(unit, unit, unit, unit, unit, unit)
def test_site_joint_normalised(mu, dp, dd, m, b, c):
    rates = SiteRates(mu, dp, dd, m, b, c)
    for with_error in (True, False):
        assert site_joint_table(rates, with_error).sum() == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(unit, unit, unit, unit)
def test_zero_error_is_identity(mu, dp, dd, m):
    rates = SiteRates(mu, dp, dd, m, 0.0, 0.0)
    np.testing.assert_allclose(site_joint_table(rates, True), site_joint_table(rates, False),
                               atol=1e-15)
