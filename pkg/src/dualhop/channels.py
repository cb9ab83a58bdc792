"""Link parameters and random channel samplers.

Three media are covered: the atmospheric FSO hop (Gamma-Gamma irradiance),
the RIS-aided RF backup (Rayleigh legs with UMi large-scale loss) and the
O-RIS-assisted underwater optical hop (cascaded Gamma-Gamma turbulence,
Beer-Lambert extinction and Gaussian-beam pointing error).

All samplers take an explicit ``numpy.random.Generator`` and an optional
``size`` giving leading batch dimensions, so one call can draw a full
Monte-Carlo batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erf

TWO_PI = 2.0 * math.pi


class ChannelDomainError(ValueError):
    """An input is outside the physical domain of a channel formula."""


def _require_positive(**values):
    for name, value in values.items():
        if not value > 0:
            raise ChannelDomainError(f"{name} must be > 0, got {value}")


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(linear):
    return 10.0 * np.log10(linear)


def wrap_phase(theta):
    """Wrap angles to [-pi, pi)."""
    wrapped = np.mod(np.asarray(theta, dtype=float) + math.pi, TWO_PI) - math.pi
    # mod can round up to 2*pi for tiny negative inputs
    return np.where(wrapped >= math.pi, -math.pi, wrapped)


# ---------------------------------------------------------------------------
# Parameter types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaGammaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        _require_positive(alpha=self.alpha, beta=self.beta)

    @property
    def scintillation_index(self) -> float:
        return 1.0 / self.alpha + 1.0 / self.beta + 1.0 / (self.alpha * self.beta)


@dataclass(frozen=True)
class FsoLinkParams:
    wavelength_m: float
    cn2: float
    distance_m: float
    mean_snr_linear: float
    switch_threshold_linear: float

    def __post_init__(self):
        _require_positive(
            wavelength_m=self.wavelength_m,
            cn2=self.cn2,
            distance_m=self.distance_m,
            mean_snr_linear=self.mean_snr_linear,
            switch_threshold_linear=self.switch_threshold_linear,
        )
        if not 100e-9 < self.wavelength_m < 10e-6:
            raise ChannelDomainError(f"wavelength_m {self.wavelength_m} outside (100 nm, 10 um)")

    def gamma_gamma(self) -> GammaGammaParams:
        return gg_params_from_rytov(rytov_variance(self.cn2, self.wavelength_m, self.distance_m))


@dataclass(frozen=True)
class RfRisLinkParams:
    n_elements: int
    gain_tx_db: float
    gain_rx_db: float
    dist_sd_m: float
    dist_sr_m: float
    dist_rd_m: float
    mean_snr_linear: float
    outage_threshold_linear: float

    def __post_init__(self):
        if self.n_elements < 0:
            raise ChannelDomainError(f"n_elements must be >= 0, got {self.n_elements}")
        _require_positive(
            dist_sd_m=self.dist_sd_m,
            dist_sr_m=self.dist_sr_m,
            dist_rd_m=self.dist_rd_m,
            mean_snr_linear=self.mean_snr_linear,
            outage_threshold_linear=self.outage_threshold_linear,
        )

    def large_scale(self) -> tuple[float, float, float]:
        """Linear-scale (lambda_sd, lambda_sr, lambda_rd) from the UMi model."""
        return tuple(
            float(db_to_linear(umi_path_loss_db(self.gain_tx_db, self.gain_rx_db, d)))
            for d in (self.dist_sd_m, self.dist_sr_m, self.dist_rd_m)
        )


@dataclass(frozen=True)
class PointingErrorParams:
    """Gaussian-beam misalignment model.

    ``collected_fraction`` (A_0) and ``equiv_beamwidth_m`` (w_zeq) are
    derived by :func:`beam_geometry`; use :meth:`resolved` to fill them.
    """

    beam_waist_m: float
    aperture_diameter_m: float
    jitter_elev_rad: float
    jitter_azim_rad: float
    collected_fraction: float | None = None
    equiv_beamwidth_m: float | None = None

    def __post_init__(self):
        _require_positive(beam_waist_m=self.beam_waist_m, aperture_diameter_m=self.aperture_diameter_m)
        if self.jitter_elev_rad < 0 or self.jitter_azim_rad < 0:
            raise ChannelDomainError("pointing jitters must be >= 0")
        if self.collected_fraction is not None and not 0 < self.collected_fraction <= 1:
            raise ChannelDomainError(f"A_0 must lie in (0, 1], got {self.collected_fraction}")

    @property
    def is_resolved(self) -> bool:
        return self.collected_fraction is not None and self.equiv_beamwidth_m is not None

    def resolved(self, link_length_m: float, wavelength_m: float) -> "PointingErrorParams":
        a0, w_eq = beam_geometry(self, link_length_m, wavelength_m)
        return replace(self, collected_fraction=a0, equiv_beamwidth_m=w_eq)


@dataclass(frozen=True)
class UwocOrisLinkParams:
    """O-RIS-assisted underwater optical hop.

    The pointing model is resolved against the unfolded path
    ``dist_sr_m + dist_rd_m`` at construction time.
    """

    n_elements: int
    extinction_coeff_per_m: float
    dist_sr_m: float
    dist_rd_m: float
    gg_sr: GammaGammaParams
    gg_rd: GammaGammaParams
    pointing: PointingErrorParams
    mean_snr_linear: float
    outage_threshold_linear: float
    reflection_coeffs: np.ndarray | None = None
    wavelength_m: float = 532e-9

    def __post_init__(self):
        if self.n_elements < 1:
            raise ChannelDomainError(f"UWOC n_elements must be >= 1, got {self.n_elements}")
        if self.extinction_coeff_per_m < 0:
            raise ChannelDomainError("extinction coefficient must be >= 0")
        _require_positive(
            dist_sr_m=self.dist_sr_m,
            dist_rd_m=self.dist_rd_m,
            mean_snr_linear=self.mean_snr_linear,
            outage_threshold_linear=self.outage_threshold_linear,
            wavelength_m=self.wavelength_m,
        )
        rho = self.reflection_coeffs
        rho = np.ones(self.n_elements) if rho is None else np.asarray(rho, dtype=float)
        if rho.shape != (self.n_elements,):
            raise ChannelDomainError(f"reflection_coeffs must have shape ({self.n_elements},)")
        if np.any(rho < 0) or np.any(rho > 1):
            raise ChannelDomainError("every reflection coefficient must lie in [0, 1]")
        object.__setattr__(self, "reflection_coeffs", rho)
        if not self.pointing.is_resolved:
            object.__setattr__(self, "pointing", self.pointing.resolved(self.link_length_m, self.wavelength_m))

    @property
    def link_length_m(self) -> float:
        return self.dist_sr_m + self.dist_rd_m

    @property
    def path_loss(self) -> float:
        return beer_lambert_loss(self.extinction_coeff_per_m, self.dist_sr_m, self.dist_rd_m)

    @property
    def cascade_scintillation_index(self) -> float:
        """SI of one element's turbulence product G_sr * G_rd."""
        return (1 + self.gg_sr.scintillation_index) * (1 + self.gg_rd.scintillation_index) - 1

    def element_power(self) -> float:
        """Stationary E|h_n|^2 of one element's cascade coefficient."""
        return self.path_loss**2 * pointing_second_moment(self.pointing, self.link_length_m) * (
            1 + self.cascade_scintillation_index
        )

    def with_elements(self, n_elements: int) -> "UwocOrisLinkParams":
        return replace(self, n_elements=n_elements, reflection_coeffs=None)


@dataclass(frozen=True)
class UwocDirectLinkParams:
    """Line-of-sight underwater optical link (no surface), one turbulence leg."""

    extinction_coeff_per_m: float
    distance_m: float
    gg: GammaGammaParams
    pointing: PointingErrorParams
    mean_snr_linear: float
    outage_threshold_linear: float
    wavelength_m: float = 532e-9

    def __post_init__(self):
        if self.extinction_coeff_per_m < 0:
            raise ChannelDomainError("extinction coefficient must be >= 0")
        _require_positive(
            distance_m=self.distance_m,
            mean_snr_linear=self.mean_snr_linear,
            outage_threshold_linear=self.outage_threshold_linear,
            wavelength_m=self.wavelength_m,
        )
        if not self.pointing.is_resolved:
            object.__setattr__(self, "pointing", self.pointing.resolved(self.distance_m, self.wavelength_m))

    @property
    def link_length_m(self) -> float:
        return self.distance_m

    @property
    def path_loss(self) -> float:
        return math.exp(-self.extinction_coeff_per_m * self.distance_m)


@dataclass(frozen=True)
class PhaseConfig:
    """RIS / O-RIS phase vector; ``bits`` is set when it lies on a 2^b grid."""

    phases: np.ndarray
    bits: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "phases", wrap_phase(self.phases))

    def __len__(self):
        return self.phases.shape[-1]


@dataclass(frozen=True)
class RfChannelSample:
    """Small-scale RF channels. ``h_sr`` holds the entries of h_sr^H."""

    h_sd: np.ndarray
    h_sr: np.ndarray
    h_rd: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.h_sr.shape[-1]


@dataclass(frozen=True)
class UwocChannelSample:
    """Per-element cascade coefficients of the O-RIS hop."""

    magnitude: np.ndarray
    phase: np.ndarray
    path_loss: float = 1.0
    pointing: np.ndarray = field(default_factory=lambda: np.ones(()))

    @property
    def coefficients(self) -> np.ndarray:
        return self.magnitude * np.exp(1j * self.phase)

    @property
    def n_elements(self) -> int:
        return self.magnitude.shape[-1]


# ---------------------------------------------------------------------------
# Atmospheric FSO
# ---------------------------------------------------------------------------


def rytov_variance(cn2: float, wavelength_m: float, distance_m: float) -> float:
    """Plane-wave Rytov variance 1.23 Cn^2 k^(7/6) d^(11/6)."""
    _require_positive(cn2=cn2, wavelength_m=wavelength_m, distance_m=distance_m)
    k = TWO_PI / wavelength_m
    return 1.23 * cn2 * k ** (7.0 / 6.0) * distance_m ** (11.0 / 6.0)


def gg_params_from_rytov(sigma_r2: float) -> GammaGammaParams:
    """Large- and small-scale Gamma-Gamma shapes for a given Rytov variance."""
    _require_positive(sigma_r2=sigma_r2)
    s125 = sigma_r2 ** (6.0 / 5.0)  # sigma_r^(12/5)
    alpha = 1.0 / math.expm1(0.49 * sigma_r2 / (1.0 + 1.11 * s125) ** (7.0 / 6.0))
    beta = 1.0 / math.expm1(0.51 * sigma_r2 / (1.0 + 0.69 * s125) ** (5.0 / 6.0))
    return GammaGammaParams(alpha, beta)


def sample_gamma_gamma(params: GammaGammaParams, rng: np.random.Generator, size=None):
    """Unit-mean Gamma-Gamma irradiance X*Y."""
    x = rng.gamma(params.alpha, 1.0 / params.alpha, size)
    y = rng.gamma(params.beta, 1.0 / params.beta, size)
    return x * y


# ---------------------------------------------------------------------------
# RF with RIS
# ---------------------------------------------------------------------------


def umi_path_loss_db(gain_tx_db: float, gain_rx_db: float, distance_m) -> float:
    """3GPP UMi large-scale gain in dB (negative for a loss)."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ChannelDomainError(f"distance must be > 0, got {distance_m}")
    out = gain_tx_db + gain_rx_db - 35.1 - 36.7 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def sample_rayleigh_channel(mean_power_linear: float, rng: np.random.Generator, size=None):
    """Circularly-symmetric complex Gaussian with E|h|^2 = mean_power_linear."""
    _require_positive(mean_power_linear=mean_power_linear)
    scale = math.sqrt(mean_power_linear / 2.0)
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return scale * (re + 1j * im)


def sample_rf_channels(params: RfRisLinkParams, rng: np.random.Generator, size=None) -> RfChannelSample:
    lam_sd, lam_sr, lam_rd = params.large_scale()
    batch = () if size is None else tuple(np.atleast_1d(size))
    h_sd = sample_rayleigh_channel(lam_sd, rng, batch or None)
    h_sr = sample_rayleigh_channel(lam_sr, rng, batch + (params.n_elements,))
    h_rd = sample_rayleigh_channel(lam_rd, rng, batch + (params.n_elements,))
    return RfChannelSample(np.asarray(h_sd), h_sr, h_rd)


def rf_effective_snr(sample: RfChannelSample, phases: PhaseConfig | np.ndarray, mean_snr_linear: float,
                     amplitudes=None):
    """gamma_bar * |h_sd + sum_n h_sr,n beta_n e^{j theta_n} h_rd,n|^2."""
    theta = phases.phases if isinstance(phases, PhaseConfig) else np.asarray(phases, dtype=float)
    if theta.shape[-1] != sample.n_elements:
        raise ValueError(f"phase vector has {theta.shape[-1]} entries, channel has {sample.n_elements}")
    beta = 1.0 if amplitudes is None else np.asarray(amplitudes, dtype=float)
    reflected = np.sum(sample.h_sr * beta * np.exp(1j * theta) * sample.h_rd, axis=-1)
    return mean_snr_linear * np.abs(sample.h_sd + reflected) ** 2


def optimal_phases(sample: RfChannelSample) -> PhaseConfig:
    """Co-phase every reflected path with the direct path."""
    theta = np.angle(sample.h_sd)[..., None] - np.angle(sample.h_sr) - np.angle(sample.h_rd)
    return PhaseConfig(theta)


def coherent_rf_snr(sample: RfChannelSample, mean_snr_linear: float):
    """SNR under optimal phases, in the amplitude-sum form."""
    amp = np.abs(sample.h_sd) + np.sum(np.abs(sample.h_sr) * np.abs(sample.h_rd), axis=-1)
    return mean_snr_linear * amp**2


# ---------------------------------------------------------------------------
# Underwater optical with O-RIS
# ---------------------------------------------------------------------------


def beer_lambert_loss(c_per_m: float, l_sr_m: float, l_rd_m: float) -> float:
    if c_per_m < 0:
        raise ChannelDomainError("extinction coefficient must be >= 0")
    _require_positive(l_sr_m=l_sr_m, l_rd_m=l_rd_m)
    return math.exp(-c_per_m * (l_sr_m + l_rd_m))


def beam_geometry(pointing: PointingErrorParams, link_length_m: float, wavelength_m: float):
    """(A_0, w_zeq) for a Gaussian beam on a circular aperture."""
    _require_positive(link_length_m=link_length_m, wavelength_m=wavelength_m)
    w0 = pointing.beam_waist_m
    w_z = w0 * math.sqrt(1.0 + (wavelength_m * link_length_m / (math.pi * w0**2)) ** 2)
    nu = math.sqrt(math.pi) * (pointing.aperture_diameter_m / 2.0) / (math.sqrt(2.0) * w_z)
    erf_nu = float(erf(nu))
    a0 = erf_nu**2
    # exp(nu^2) overflows only when the aperture dwarfs the beam; the
    # equivalent beamwidth is then effectively infinite (no pointing fade)
    log_w_eq2 = 2 * math.log(w_z) + 0.5 * math.log(math.pi) + math.log(erf_nu) - math.log(2.0 * nu) + nu**2
    return a0, math.exp(0.5 * log_w_eq2) if log_w_eq2 < 1400 else math.inf


def _displacement_stds(pointing: PointingErrorParams, link_length_m: float):
    return link_length_m * pointing.jitter_elev_rad, link_length_m * pointing.jitter_azim_rad


def sample_pointing_error(pointing: PointingErrorParams, link_length_m: float, rng: np.random.Generator,
                          size=None):
    """A_0 exp(-2 R^2 / w_zeq^2) with R from elevation/azimuth displacements."""
    if not pointing.is_resolved:
        raise ValueError("pointing parameters must be resolved with beam_geometry first")
    sx, sy = _displacement_stds(pointing, link_length_m)
    x = sx * rng.standard_normal(size)
    y = sy * rng.standard_normal(size)
    r2 = x * x + y * y
    return pointing.collected_fraction * np.exp(-2.0 * r2 / pointing.equiv_beamwidth_m**2)


def pointing_second_moment(pointing: PointingErrorParams, link_length_m: float) -> float:
    """E[h_p^2] for the Gaussian-displacement model."""
    w2 = pointing.equiv_beamwidth_m**2
    out = pointing.collected_fraction**2
    for s in _displacement_stds(pointing, link_length_m):
        out /= math.sqrt(1.0 + 8.0 * s * s / w2)
    return out


def sample_uwoc_cascade(params: UwocOrisLinkParams, rng: np.random.Generator, size=None) -> UwocChannelSample:
    """Per-element magnitudes h_l h_p G_sr G_rd with uniform cascade phases.

    Path loss and pointing error are common to all elements of a draw.
    """
    batch = () if size is None else tuple(np.atleast_1d(size))
    shape = batch + (params.n_elements,)
    h_l = params.path_loss
    h_p = sample_pointing_error(params.pointing, params.link_length_m, rng, batch or None)
    h_p = np.asarray(h_p)[..., None]
    g = sample_gamma_gamma(params.gg_sr, rng, shape) * sample_gamma_gamma(params.gg_rd, rng, shape)
    phase = rng.uniform(-math.pi, math.pi, shape)
    return UwocChannelSample(h_l * h_p * g, phase, h_l, h_p[..., 0])


def sample_uwoc_direct(params: UwocDirectLinkParams, rng: np.random.Generator, size=None):
    """Channel gain h_l h_p G of the direct link (SNR = mean_snr * gain^2)."""
    h_p = sample_pointing_error(params.pointing, params.link_length_m, rng, size)
    return params.path_loss * np.asarray(h_p) * sample_gamma_gamma(params.gg, rng, size)
