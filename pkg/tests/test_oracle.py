import itertools
import math

import numpy as np
import pytest

from methfid.core import MethylationPattern, SiteRates
from methfid.errors import DataError, EnumerationTooLarge
from methfid.hierarchy import stationary_rm
from methfid.likelihood import Dataset
from methfid.oracle import (
    MomentConstraints,
    brute_force_pattern_prob,
    em_fit,
    expected_dyad_fractions,
    moment_fit,
    shared_loglik,
)
from methfid.simulator import simulate_dataset

MU, DBAR = 0.976, 0.075
M_STAT = stationary_rm(MU, DBAR, DBAR)


def test_single_site_closed_form():
    rates = SiteRates.shared(1, 0.9, 0.2, 0.3, 0.6)
    pat = MethylationPattern.from_strings("1", "1")
    want = 0.6 * 0.9 + 0.4 * 0.2 * 0.3
    assert brute_force_pattern_prob(pat, rates, with_error=False) == pytest.approx(want)


def test_brute_force_normalises():
    rates = SiteRates([0.9, 0.7], [0.1, 0.3], [0.2, 0.05], [0.6, 0.2], [0.01, 0.02], [0.03, 0.04])
    strands = ["".join(b) for b in itertools.product("01", repeat=2)]
    pats = {MethylationPattern.from_strings(a, b) for a in strands for b in strands}
    assert sum(brute_force_pattern_prob(p, rates) for p in pats) == pytest.approx(1.0, abs=1e-14)


def test_brute_force_size_limit():
    rates = SiteRates.shared(7, 0.9, 0.1, 0.1, 0.5)
    pat = MethylationPattern.from_strings("1" * 7, "0" * 7)
    with pytest.raises(EnumerationTooLarge):
        brute_force_pattern_prob(pat, rates)


def test_dyad_fractions_agree_with_enumeration():
    args = (0.95, 0.1, 0.06, 0.7, 0.004, 0.02)
    rates = SiteRates.shared(1, *args)
    p_m, p_h, p_u = expected_dyad_fractions(*args)
    assert p_m + p_h + p_u == pytest.approx(1.0)
    get = lambda a, b: brute_force_pattern_prob(MethylationPattern.from_strings(a, b), rates)
    assert p_m == pytest.approx(get("1", "1"), abs=1e-15)
    assert p_h == pytest.approx(get("1", "0"), abs=1e-15)
    assert p_u == pytest.approx(get("0", "0"), abs=1e-15)


def _observed(c=0.016):
    return expected_dyad_fractions(MU, DBAR, DBAR, M_STAT, 0.003, c)


def test_moment_fit_recovers_truth_at_true_c():
    fam = moment_fit(_observed(), MomentConstraints(c=0.016))
    assert fam.feasible[0]
    assert fam.fail[0] == pytest.approx(1 - MU, abs=1e-8)
    assert fam.denovo_mean[0] == pytest.approx(DBAR, abs=1e-8)
    assert fam.m[0] == pytest.approx(M_STAT, abs=1e-8)


def test_moment_ridge_is_affine_and_falling():
    fam = moment_fit(_observed())
    slope, intercept = fam.linear_fit(0.0, 0.03)
    # under stationarity the failure rate trades off against c one for one,
    # with a negative sign
    assert slope == pytest.approx(-1.07, abs=0.05)
    assert intercept == pytest.approx(0.041, abs=0.002)
    keep = fam.feasible & (fam.c <= 0.03)
    resid = fam.fail[keep] - (slope * fam.c[keep] + intercept)
    assert np.max(np.abs(resid)) < 5e-4


def test_denovo_curve_shape():
    fam = moment_fit(_observed())
    c = fam.c[fam.feasible]
    d = fam.denovo_mean[fam.feasible]
    assert np.all(np.diff(d) < 0)
    assert np.all(np.diff(d, 2) <= 1e-12)  # concave
    assert np.max(np.abs(d - (0.44 + 0.05 / (c - 0.15)))) < 0.012
    # no solution once the error rate alone explains the hemimethylation
    assert not fam.feasible[-1]


def test_moment_fit_input_checks():
    with pytest.raises(ValueError):
        moment_fit((0.5, 0.2, 0.2))
    with pytest.raises(ValueError):
        moment_fit(_observed(), MomentConstraints(stationary=False))


def test_moment_family_csv():
    text = moment_fit(_observed(), MomentConstraints(c=0.01)).to_csv()
    header, row = text.strip().splitlines()
    assert header.startswith("c,one_minus_mu")
    assert row.split(",")[0] == "0.01"


@pytest.fixture(scope="module")
def shared_data():
    rates = SiteRates.shared(6, 0.95, 0.08, 0.06, 0.7, 0.003, 0.02)
    return simulate_dataset(rates, 400, seed=21)


def test_em_increases_loglik_and_converges(shared_data):
    res = em_fit(shared_data)
    assert res.converged
    assert np.all(np.diff(res.trace) >= -1e-9)
    assert res.params["b"] == 0.003
    assert res.loglik == pytest.approx(shared_loglik(shared_data, res.params))


def test_em_optimum_is_stationary(shared_data):
    res = em_fit(shared_data)
    best = res.loglik
    for name in ("mu", "dp", "dd", "m", "c"):
        for step in (-1e-4, 1e-4):
            theta = dict(res.params)
            theta[name] += step
            assert shared_loglik(shared_data, theta) <= best + 1e-6


def test_em_without_error_pins_rates(shared_data):
    res = em_fit(shared_data, with_error=False)
    assert res.params["b"] == 0.0 and res.params["c"] == 0.0
    assert math.isfinite(res.loglik)


def test_em_rejects_empty_data():
    with pytest.raises(DataError):
        em_fit(None)


def test_shared_loglik_matches_enumeration():
    theta = dict(mu=0.9, dp=0.1, dd=0.2, m=0.6, b=0.01, c=0.03)
    pats = [MethylationPattern.from_strings("10", "01"), MethylationPattern.from_strings("11", "11")]
    rates = SiteRates.shared(2, theta["mu"], theta["dp"], theta["dd"], theta["m"],
                             theta["b"], theta["c"])
    want = sum(math.log(brute_force_pattern_prob(p, rates)) for p in pats)
    assert shared_loglik(Dataset(pats), theta) == pytest.approx(want, rel=1e-12)
