import numpy as np
import pytest

from methfid.core import HyperParams, SiteRates
from methfid.simulator import draw_site_rates, simulate_dataset

REFERENCE_HYPERS = HyperParams(
    r_mu=0.976, g_mu=10 ** -2.5,
    r_dp=0.08, g_dp=10 ** -1.5,
    r_dd=0.07, g_dd=10 ** -2.0,
    r_c=0.016, g_c=10 ** -2.5,
    g_m=10 ** -3.0,
    b_value=0.003,
)


def random_rates(rng, s, with_error=True, lo=0.001, hi=0.999):
    mu, dp, dd, m = rng.uniform(lo, hi, size=(4, s))
    if with_error:
        b, c = rng.uniform(0.0, 0.1, size=(2, s))
    else:
        b = c = np.zeros(s)
    return SiteRates(mu, dp, dd, m, b, c)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_data():
    rates = draw_site_rates(REFERENCE_HYPERS, 6, seed=11)
    return simulate_dataset(rates, 40, seed=12)


# One line per acceptance criterion, printed after the run.
CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(number: int, ok: bool, detail: str) -> bool:
        CRITERIA[number] = (bool(ok), detail)
        return bool(ok)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
