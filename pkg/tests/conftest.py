import math

import numpy as np
import pytest

from dualhop.channels import (
    FsoLinkParams,
    PointingErrorParams,
    RfRisLinkParams,
    UwocOrisLinkParams,
    gg_params_from_rytov,
)

# Lines appended by tests/test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_pointing(elev=2e-3, azim=1.5e-3):
    return PointingErrorParams(0.01, 0.05, elev, azim)


def make_uwoc(n=32, rytov=0.2, mean_snr_db=20.0, elev=2e-3, azim=1.5e-3, l_sr=40.0, l_rd=40.0, **kw):
    gg = gg_params_from_rytov(rytov)
    return UwocOrisLinkParams(n, 0.05, l_sr, l_rd, gg, gg, make_pointing(elev, azim), 10 ** (mean_snr_db / 10),
                              10**1.5, **kw)


def make_fso(mean_snr_db=10.0, threshold_db=7.0, distance=1000.0):
    return FsoLinkParams(1550e-9, 1e-13, distance, 10 ** (mean_snr_db / 10), 10 ** (threshold_db / 10))


def make_rf(n=16, mean_snr_db=38.0, d_sd=500.0, d_sr=450.0, d_rd=60.0):
    return RfRisLinkParams(n, 44.0, 44.0, d_sd, d_sr, d_rd, 10 ** (mean_snr_db / 10), 10**0.3)


@pytest.fixture
def uwoc_link():
    return make_uwoc()


def within_se(a, b, se, k=3.0):
    return abs(a - b) <= k * se + 1e-12


__all__ = ["make_uwoc", "make_fso", "make_rf", "make_pointing", "within_se", "math"]
