import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from methfid.posterior import (
    PosteriorSamples,
    autocorrelation,
    credible_interval,
    family_summary,
    joint_scatter,
    site_intervals,
    split_rhat,
    summarize,
    variability_label,
)


def _samples(n=400, s=3, chains=2, seed=0):
    rng = np.random.default_rng(seed)
    names = [f"{f}.{j + 1}" for f in ("mu", "dp", "dd", "m", "c") for j in range(s)]
    names += ["r_mu", "g_mu", "r_dp", "g_dp", "r_dd", "g_dd", "r_b", "g_b", "r_c", "g_c", "g_m",
              "logpost"]
    draws = rng.uniform(0.01, 0.99, (n, len(names)))
    for fam_g in ("g_mu", "g_dp", "g_dd", "g_c", "g_m"):
        draws[:, names.index(fam_g)] = 10 ** rng.uniform(-2.8, -2.2, n)
    draws[:, names.index("g_b")] = np.nan
    return PosteriorSamples(draws, names, np.repeat(np.arange(chains), n // chains))


def test_reference_quantiles():
    assert credible_interval(np.arange(1, 101), 0.8) == pytest.approx((10.9, 50.5, 90.1))


def test_interval_argument_checks():
    with pytest.raises(ValueError):
        credible_interval(np.arange(5))
    with pytest.raises(ValueError):
        credible_interval(np.arange(50), 1.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), lo=st.floats(0.05, 0.9), extra=st.floats(0.0, 0.09))
def test_wider_coverage_never_shrinks(seed, lo, extra):
    x = np.random.default_rng(seed).normal(size=200)
    a = credible_interval(x, lo)
    b = credible_interval(x, lo + extra)
    assert b[0] <= a[0] and b[2] >= a[2]


@pytest.mark.parametrize("value,label", [(-3.5, "Very low"), (-2.5, "Low"), (-1.5, "Medium"),
                                         (-0.5, "High")])
def test_variability_labels(value, label):
    assert variability_label(value) == label


def test_scatter_recovers_a_line():
    ps = _samples()
    ps.draws[:, ps.names.index("r_c")] = 0.5 - 2.0 * ps.column("r_mu")
    sc = joint_scatter(ps, "1-r_mu", "r_c")
    assert sc.slope == pytest.approx(2.0)
    assert sc.intercept == pytest.approx(-1.5)
    assert sc.correlation == pytest.approx(1.0)


def test_independent_columns_are_uncorrelated():
    sc = joint_scatter(_samples(n=4000), "r_mu", "r_c")
    assert abs(sc.correlation) < 4 / np.sqrt(4000)


def test_series_expressions():
    ps = _samples()
    assert np.allclose(ps.series("1-mu.1"), 1 - ps.column("mu.1"))
    assert np.allclose(ps.series("log10.g_m"), np.log10(ps.column("g_m")))
    assert np.allclose(ps.series("median.denovo"),
                       np.median(0.5 * (ps.site_matrix("dp") + ps.site_matrix("dd")), axis=1))
    with pytest.raises(KeyError):
        ps.series("nope")


def test_family_summary_and_sites():
    ps = _samples()
    fs = family_summary(ps, "1-mu")
    assert fs.r[1] == pytest.approx(np.median(1 - ps.column("r_mu")))
    assert fs.label == "Low"
    assert site_intervals(ps, "dp").shape == (3, 4)


def test_split_rhat():
    rng = np.random.default_rng(2)
    same = [rng.normal(size=1000) for _ in range(3)]
    assert split_rhat(same) == pytest.approx(1.0, abs=0.02)
    apart = [rng.normal(size=1000) + 3 * k for k in range(3)]
    assert split_rhat(apart) > 1.5


def test_autocorrelation():
    x = np.cumsum(np.random.default_rng(3).normal(size=2000))
    assert autocorrelation(x, 0) == 1.0
    assert autocorrelation(x, 10) > 0.8


def test_concat_and_select():
    ps = _samples()
    both = PosteriorSamples.concat([ps.select_chain(0), ps.select_chain(1)])
    assert np.array_equal(both.draws, ps.draws, equal_nan=True)
    other = PosteriorSamples(ps.draws[:, :3], ps.names[:3])
    with pytest.raises(ValueError):
        PosteriorSamples.concat([ps, other])


def test_summarize_document():
    out = summarize(_samples())
    assert set(out["families"]) == {"1-mu", "dp", "dd", "c", "m"}
    assert "split_rhat" in out
    assert out["families"]["dp"]["label"] == "Low"
