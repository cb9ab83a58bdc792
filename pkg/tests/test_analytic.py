import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_fso, make_pointing, make_rf, make_uwoc
from dualhop.analytic import (
    CdfCurve,
    ParameterRegimeError,
    cascade_gg,
    cdf_curve,
    e2e_op,
    fso_snr_cdf,
    gamma_gamma_cdf,
    gamma_gamma_pdf,
    gg_sum_approx,
    hard_switching_op,
    hybrid_link_op,
    pointing_exponents,
    rf_gamma_approx,
    rf_outage_probability,
    rf_snr_cdf,
    uwoc_direct_scale,
    uwoc_oris_op,
)
from dualhop.channels import (
    ChannelDomainError,
    GammaGammaParams,
    RfRisLinkParams,
    UwocOrisLinkParams,
    gg_params_from_rytov,
    sample_gamma_gamma,
    sample_pointing_error,
)


def test_gamma_gamma_pdf_against_mpmath():
    gg = gg_params_from_rytov(1.0)
    a, b = gg.alpha, gg.beta
    for x in (0.05, 0.5, 1.0, 3.0):
        with mpmath.workdps(30):
            ref = (2 * (a * b) ** ((a + b) / 2) / (mpmath.gamma(a) * mpmath.gamma(b))
                   * mpmath.mpf(x) ** ((a + b) / 2 - 1) * mpmath.besselk(a - b, 2 * mpmath.sqrt(a * b * x)))
        assert gamma_gamma_pdf(x, gg) == pytest.approx(float(ref), rel=1e-10)


def test_gamma_gamma_cdf_against_mpmath_quadrature():
    gg = gg_params_from_rytov(0.25)
    a, b = gg.alpha, gg.beta
    with mpmath.workdps(25):
        f = lambda s: (2 * (a * b) ** ((a + b) / 2) / (mpmath.gamma(a) * mpmath.gamma(b))  # noqa: E731
                       * s ** ((a + b) / 2 - 1) * mpmath.besselk(a - b, 2 * mpmath.sqrt(a * b * s)))
        ref = mpmath.quad(f, [0, 0.5, 0.8])
    assert gamma_gamma_cdf(0.8, gg) == pytest.approx(float(ref), abs=1e-8)


@pytest.mark.parametrize("rytov", [0.25, 1.0, 4.0])
def test_fso_cdf_limits_and_monotone(rytov):
    gg = gg_params_from_rytov(rytov)
    assert fso_snr_cdf(0.0, 10.0, gg) == 0.0
    assert fso_snr_cdf(10.0 * 1e6, 10.0, gg) >= 1 - 1e-6
    grid = np.logspace(-4, 4, 60) * 10.0
    curve = cdf_curve(lambda g: fso_snr_cdf(g, 10.0, gg), grid, "quad")
    assert np.all(np.diff(curve.probability) >= -1e-8)
    with pytest.raises(ChannelDomainError):
        fso_snr_cdf(-1.0, 10.0, gg)


def test_cdf_curve_rejects_decreasing():
    with pytest.raises(ValueError):
        CdfCurve(np.array([1.0, 2.0]), np.array([0.5, 0.4]))


def test_rf_constants():
    approx = rf_gamma_approx(RfRisLinkParams(16, 0, 0, 1, 1, 1, 1.0, 1.0))
    with mpmath.workdps(30):
        ref = mpmath.pi**2 / (16 - mpmath.pi**2)
    assert approx.k == pytest.approx(float(ref), rel=1e-14)
    assert round(approx.k, 3) == 1.610
    # unit large-scale gains need 35.1 dB of antenna gain per link: use the formula directly
    assert (4 - math.pi**2 / 4) / math.pi == pytest.approx(0.48784, abs=1e-5)


def _unit_rf(n, mean_snr=1.0):
    # antenna gains of 35.1/2 dB each cancel the UMi intercept at d = 1 m
    return RfRisLinkParams(n, 17.55, 17.55, 1.0, 1.0, 1.0, mean_snr, 1.0)


def test_rf_gamma_approx_regression_against_mpmath():
    rf = _unit_rf(16)
    assert all(lam == pytest.approx(1.0) for lam in rf.large_scale())
    a = rf_gamma_approx(rf)
    with mpmath.workdps(30):
        pi = mpmath.pi
        k = pi**2 / (16 - pi**2)
        w = (4 - pi**2 / 4) / pi
        mean = mpmath.sqrt(pi) + 2 * 16 * k * w
        var = 4 + 4 * 16 * k * w**2 - pi
        k_o, w_o = mean**2 / var, var / (2 * mean)
    assert a.w == pytest.approx(float(w), rel=1e-12)
    assert a.k_o == pytest.approx(float(k_o), rel=1e-12)
    assert a.w_o == pytest.approx(float(w_o), rel=1e-12)


def test_rf_gamma_approx_needs_elements():
    with pytest.raises(ParameterRegimeError):
        rf_gamma_approx(_unit_rf(0))


def test_rf_cdf_limits():
    a = rf_gamma_approx(make_rf(16))
    assert rf_snr_cdf(0.0, a) == 0.0
    assert rf_snr_cdf(1e30, a) == pytest.approx(1.0)
    g = np.logspace(-3, 8, 200)
    assert np.all(np.diff(rf_snr_cdf(g, a)) >= 0)


def test_hard_switching_limits():
    fso = make_fso()
    f = fso_snr_cdf(fso.switch_threshold_linear, fso.mean_snr_linear, fso.gamma_gamma())
    assert hard_switching_op(fso, 1.0) == pytest.approx(f)
    assert hybrid_link_op(fso, None) == pytest.approx(f)
    tiny = make_fso(mean_snr_db=10, threshold_db=-200)
    assert hard_switching_op(tiny, 1.0) < 1e-8
    assert hybrid_link_op(fso, make_rf(64)) < hybrid_link_op(fso, make_rf(16)) < hybrid_link_op(fso, make_rf(0))


def test_gg_sum_single_element_recovers_si():
    for si in (0.1, 0.7, 3.0):
        for r in (0.5, 1.0, 2.0):
            gg = gg_sum_approx(1, si, r)
            assert gg.scintillation_index == pytest.approx(si, rel=1e-12)
            assert gg.alpha / gg.beta == pytest.approx(r, rel=1e-12)


def test_gg_sum_si_shrinks_with_n():
    si = [gg_sum_approx(n, 0.8).scintillation_index for n in (1, 2, 4, 16, 64)]
    assert all(a > b for a, b in zip(si, si[1:]))
    with pytest.raises(ParameterRegimeError):
        gg_sum_approx(0.5, 0.8)


def test_gg_sum_against_sampling():
    gg = gg_params_from_rytov(0.2)
    cgg = cascade_gg(gg, gg)
    si = (1 + gg.scintillation_index) ** 2 - 1
    approx = gg_sum_approx(16, si, cgg.alpha / cgg.beta)
    rng = np.random.default_rng(21)
    s = np.mean(sample_gamma_gamma(gg, rng, (10**6, 16)) * sample_gamma_gamma(gg, rng, (10**6, 16)), axis=1)
    s.sort()
    xs = np.quantile(s, np.linspace(0.005, 0.995, 60))
    emp = np.searchsorted(s, xs, side="right") / s.size
    ana = np.array([gamma_gamma_cdf(x, approx) for x in xs])
    assert np.max(np.abs(emp - ana)) <= 0.03


def test_uwoc_op_zero_and_step_limit():
    link = make_uwoc(n=8)
    assert uwoc_oris_op(link, 0.0) == 0.0
    gg = GammaGammaParams(1e9, 1e9)
    det = UwocOrisLinkParams(8, 0.05, 40, 40, gg, gg, make_pointing(0, 0), 100.0, 10.0)
    step = uwoc_direct_scale(det)
    assert uwoc_oris_op(det, 0.98 * step) < 1e-6
    assert uwoc_oris_op(det, 1.02 * step) > 1 - 1e-6


def test_uwoc_op_decreases_with_elements():
    ops = [uwoc_oris_op(make_uwoc(n=n, mean_snr_db=25), 10**1.5) for n in (16, 32, 64, 128)]
    assert all(a > b for a, b in zip(ops, ops[1:]))


def test_uwoc_op_monotone_in_threshold():
    link = make_uwoc(n=32)
    g = np.logspace(-1, 3, 25)
    p = [uwoc_oris_op(link, x) for x in g]
    assert np.all(np.diff(p) >= -1e-6)
    assert p[-1] <= 1.0


def test_pointing_equal_jitter_closed_form():
    # equal jitters: P(h_p <= h) = (h/A0)^(w_eq^2 / (4 s^2)) exactly
    link = make_uwoc(elev=2e-3, azim=2e-3)
    k = pointing_exponents(link)
    s = 80 * 2e-3
    assert np.allclose(k, link.pointing.equiv_beamwidth_m**2 / (4 * s * s))
    h = sample_pointing_error(link.pointing, 80.0, np.random.default_rng(3), 10**6)
    for q in (0.3, 0.6, 0.9):
        x = q * link.pointing.collected_fraction
        assert np.mean(h <= x) == pytest.approx(q ** k[0], abs=3e-3)


def test_pointing_mixture_unequal_jitter():
    link = make_uwoc(elev=3e-3, azim=1e-3)
    k = pointing_exponents(link)
    h = sample_pointing_error(link.pointing, 80.0, np.random.default_rng(4), 10**6)
    for q in (0.3, 0.7):
        assert np.mean(h <= q * link.pointing.collected_fraction) == pytest.approx(np.mean(q**k), abs=3e-3)


def test_e2e_examples():
    assert e2e_op(0.0, 0.37) == 0.37
    assert e2e_op(1.0, 1.0) == 1.0
    assert e2e_op(0.1, 0.2) == pytest.approx(0.28)
    with pytest.raises(ValueError):
        e2e_op(-0.1, 0.5)


@settings(max_examples=200)
@given(st.floats(0, 1), st.floats(0, 1))
def test_e2e_commutes_and_dominates(a, b):
    assert e2e_op(a, b) == e2e_op(b, a)
    assert e2e_op(a, b) >= max(a, b) - 1e-15
    assert e2e_op(a, 0.0) == a


def test_rf_outage_uses_exact_direct_law():
    rf = make_rf(0)
    lam = rf.large_scale()[0]
    assert rf_outage_probability(rf) == pytest.approx(-math.expm1(-rf.outage_threshold_linear / (rf.mean_snr_linear * lam)))
