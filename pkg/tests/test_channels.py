import itertools
import math

import mpmath
import numpy as np
import pytest
from scipy import stats

from conftest import make_pointing, make_rf, make_uwoc
from dualhop.channels import (
    ChannelDomainError,
    GammaGammaParams,
    PointingErrorParams,
    RfRisLinkParams,
    UwocDirectLinkParams,
    beam_geometry,
    beer_lambert_loss,
    coherent_rf_snr,
    gg_params_from_rytov,
    optimal_phases,
    pointing_second_moment,
    rf_effective_snr,
    rytov_variance,
    sample_gamma_gamma,
    sample_pointing_error,
    sample_rayleigh_channel,
    sample_rf_channels,
    sample_uwoc_cascade,
    sample_uwoc_direct,
    umi_path_loss_db,
    wrap_phase,
)


def test_rytov_matches_high_precision():
    with mpmath.workdps(40):
        k = 2 * mpmath.pi / mpmath.mpf("1550e-9")
        ref = mpmath.mpf("1.23") * mpmath.mpf("1e-13") * k ** (mpmath.mpf(7) / 6) * mpmath.mpf(1000) ** (mpmath.mpf(11) / 6)
    assert rytov_variance(1e-13, 1550e-9, 1000.0) == pytest.approx(float(ref), rel=1e-12)
    # cn2 -> 0 limit
    assert rytov_variance(1e-30, 1550e-9, 1000.0) < 1e-15
    with pytest.raises(ChannelDomainError):
        rytov_variance(1e-13, 1550e-9, 0.0)


def test_gg_params_closed_forms():
    with mpmath.workdps(40):
        s = mpmath.mpf(1)
        a = 1 / (mpmath.exp(mpmath.mpf("0.49") * s / (1 + mpmath.mpf("1.11") * s ** (mpmath.mpf(12) / 10)) ** (mpmath.mpf(7) / 6)) - 1)
        b = 1 / (mpmath.exp(mpmath.mpf("0.51") * s / (1 + mpmath.mpf("0.69") * s ** (mpmath.mpf(12) / 10)) ** (mpmath.mpf(5) / 6)) - 1)
    gg = gg_params_from_rytov(1.0)
    assert gg.alpha == pytest.approx(float(a), rel=1e-12)
    assert gg.beta == pytest.approx(float(b), rel=1e-12)
    weak = gg_params_from_rytov(1e-3)
    assert weak.alpha > 1e3 and weak.beta > 1e3
    with pytest.raises(ChannelDomainError):
        gg_params_from_rytov(0.0)


def test_gamma_gamma_moments():
    gg = gg_params_from_rytov(1.0)
    x = sample_gamma_gamma(gg, np.random.default_rng(1), 10**6)
    assert abs(x.mean() - 1.0) < 4 * x.std() / 1e3
    si = x.var() / x.mean() ** 2
    assert si == pytest.approx(gg.scintillation_index, rel=0.03)
    tight = sample_gamma_gamma(GammaGammaParams(1e6, 1e6), np.random.default_rng(2), 10**4)
    assert tight.std() < 0.01


def test_umi_path_loss():
    assert umi_path_loss_db(0, 0, 1.0) == pytest.approx(-35.1)
    assert umi_path_loss_db(22, 22, 500.0) == pytest.approx(44 - 35.1 - 36.7 * math.log10(500))
    assert umi_path_loss_db(0, 0, 100.0) - umi_path_loss_db(0, 0, 10.0) == pytest.approx(-36.7)
    with pytest.raises(ChannelDomainError):
        umi_path_loss_db(0, 0, 0.0)


def test_rayleigh_moments_and_phase():
    h = sample_rayleigh_channel(2.5, np.random.default_rng(3), 10**6)
    p = np.abs(h) ** 2
    assert abs(p.mean() - 2.5) < 3 * p.std() / 1e3
    a = np.abs(h)
    assert abs(a.mean() - math.sqrt(math.pi * 2.5 / 4)) < 3 * a.std() / 1e3
    counts, _ = np.histogram(np.angle(h), bins=32, range=(-math.pi, math.pi))
    assert stats.chisquare(counts).pvalue > 0.01


def test_beer_lambert():
    assert beer_lambert_loss(0.0, 40, 40) == 1.0
    assert beer_lambert_loss(0.05, 40, 40) == pytest.approx(math.exp(-4))
    with pytest.raises(ChannelDomainError):
        beer_lambert_loss(-0.1, 40, 40)


def test_beam_geometry_against_mpmath():
    p = PointingErrorParams(0.01, 0.05, 0.0, 0.0)
    a0, weq = beam_geometry(p, 40.0, 532e-9)
    with mpmath.workdps(40):
        w0, lam, L, r = mpmath.mpf("0.01"), mpmath.mpf("532e-9"), mpmath.mpf(40), mpmath.mpf("0.025")
        wz = w0 * mpmath.sqrt(1 + (lam * L / (mpmath.pi * w0**2)) ** 2)
        nu = mpmath.sqrt(mpmath.pi) * r / (mpmath.sqrt(2) * wz)
        ref_a0 = mpmath.erf(nu) ** 2
        ref_w2 = wz**2 * mpmath.sqrt(mpmath.pi) * mpmath.erf(nu) / (2 * nu * mpmath.exp(-nu**2))
    assert a0 == pytest.approx(float(ref_a0), rel=1e-12)
    assert weq == pytest.approx(float(mpmath.sqrt(ref_w2)), rel=1e-12)
    big, _ = beam_geometry(PointingErrorParams(0.01, 5.0, 0.0, 0.0), 40.0, 532e-9)
    assert big == pytest.approx(1.0, abs=1e-12)


def test_pointing_without_jitter_is_a0():
    p = make_pointing(0.0, 0.0).resolved(80.0, 532e-9)
    h = sample_pointing_error(p, 80.0, np.random.default_rng(4), 100)
    assert np.all(h == p.collected_fraction)


def test_pointing_second_moment_matches_sampling():
    p = make_pointing().resolved(80.0, 532e-9)
    h = sample_pointing_error(p, 80.0, np.random.default_rng(5), 10**6)
    m2 = h**2
    assert abs(m2.mean() - pointing_second_moment(p, 80.0)) < 4 * m2.std() / 1e3


def test_deterministic_single_element_cascade():
    gg = GammaGammaParams(1e12, 1e12)
    link = make_uwoc(n=1, elev=0.0, azim=0.0)
    link = type(link)(1, 0.05, 40, 40, gg, gg, make_pointing(0, 0), 100.0, 10.0)
    s = sample_uwoc_cascade(link, np.random.default_rng(6), 50)
    assert np.allclose(s.magnitude[:, 0], link.path_loss * link.pointing.collected_fraction, rtol=1e-5)


def test_cascade_element_power_matches_sampling(uwoc_link):
    s = sample_uwoc_cascade(uwoc_link, np.random.default_rng(7), 200_000)
    p = np.abs(s.coefficients) ** 2
    assert p.mean() == pytest.approx(uwoc_link.element_power(), rel=0.02)
    assert s.magnitude.shape == (200_000, uwoc_link.n_elements)


def test_direct_link_sampler():
    gg = gg_params_from_rytov(0.2)
    link = UwocDirectLinkParams(0.05, 80.0, gg, make_pointing(), 100.0, 10.0)
    g = sample_uwoc_direct(link, np.random.default_rng(8), 10**5)
    assert np.all(g > 0)
    assert g.mean() == pytest.approx(link.path_loss * np.mean(
        sample_pointing_error(link.pointing, 80.0, np.random.default_rng(9), 10**5)), rel=0.02)


def test_uwoc_validation():
    with pytest.raises(ChannelDomainError):
        make_uwoc(n=0)
    with pytest.raises(ChannelDomainError):
        make_uwoc(n=2, reflection_coeffs=np.array([0.5, 1.5]))
    with pytest.raises(ChannelDomainError):
        make_uwoc(n=2, reflection_coeffs=np.ones(3))


def test_rf_no_elements_is_direct_path():
    rf = make_rf(n=0)
    s = sample_rf_channels(rf, np.random.default_rng(10), 5)
    snr = rf_effective_snr(s, np.zeros((5, 0)), rf.mean_snr_linear)
    assert np.allclose(snr, rf.mean_snr_linear * np.abs(s.h_sd) ** 2)


def test_optimal_phases_match_coherent_form():
    rf = make_rf(n=8)
    s = sample_rf_channels(rf, np.random.default_rng(11), 1000)
    a = rf_effective_snr(s, optimal_phases(s), rf.mean_snr_linear)
    assert np.allclose(a, coherent_rf_snr(s, rf.mean_snr_linear), rtol=1e-10)
    with pytest.raises(ValueError):
        rf_effective_snr(s, np.zeros((1000, 3)), 1.0)


def test_zero_channel_phases_give_zero_optimum():
    from dualhop.channels import RfChannelSample
    s = RfChannelSample(np.array(1.0 + 0j), np.array([2.0, 0.5 + 0j]), np.array([1.0, 3.0 + 0j]))
    assert np.allclose(optimal_phases(s).phases, 0.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_optimal_phases_beat_exhaustive_grid(n):
    rng = np.random.default_rng(100 + n)
    rf = RfRisLinkParams(n, 0, 0, 10, 10, 10, 1.0, 1.0)
    s = sample_rf_channels(rf, rng)
    best = coherent_rf_snr(s, 1.0)
    levels = np.linspace(-math.pi, math.pi, 16, endpoint=False)
    grid = np.array(list(itertools.product(levels, repeat=n)))
    snr = rf_effective_snr(s, grid, 1.0)
    assert snr.max() <= best * (1 + 1e-12)
    assert snr.max() >= 0.9 * best  # 16 levels lose at most cos(pi/16)^2-ish


def test_wrap_phase_range():
    x = np.array([-1e-18, math.pi, -math.pi, 3 * math.pi, 7.0])
    w = wrap_phase(x)
    assert np.all(w >= -math.pi) and np.all(w < math.pi)
    assert np.allclose(np.exp(1j * w), np.exp(1j * x))
