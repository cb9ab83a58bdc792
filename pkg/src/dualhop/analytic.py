"""Closed-form and semi-analytic outage/CDF expressions.

Gamma-Gamma CDFs are obtained by adaptive quadrature of the Bessel-K
density rather than through Meijer-G functions. Every quadrature checks
its own convergence and raises :class:`NumericalFailure` instead of
returning a silent NaN.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.integrate import IntegrationWarning
from scipy.special import gammainc

from .channels import (
    ChannelDomainError,
    FsoLinkParams,
    GammaGammaParams,
    RfRisLinkParams,
    UwocDirectLinkParams,
    UwocOrisLinkParams,
)
from .special import log_bessel_k

CDF_ABS_TOL = 1e-8
UWOC_ABS_TOL = 1e-6
_POINTING_ANGLES = 32


class NumericalFailure(ArithmeticError):
    """A quadrature did not reach its requested tolerance."""


class ParameterRegimeError(ValueError):
    """Parameters fall outside the regime where an approximation is defined."""


@dataclass(frozen=True)
class CdfCurve:
    snr_linear: np.ndarray
    probability: np.ndarray
    method: str = ""
    tolerance: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probability, dtype=float)
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("CDF values must lie in [0, 1]")
        if np.any(np.diff(p) < -self.tolerance):
            raise ValueError("CDF values must be nondecreasing in snr")


@dataclass(frozen=True)
class RfGammaApproxParams:
    """Gamma approximation of the coherent RF amplitude sqrt(gamma_RF)."""

    k_o: float
    w_o: float
    k: float = field(default=math.pi**2 / (16 - math.pi**2))
    w: float = 0.0

    def __post_init__(self):
        if not (self.k_o > 0 and self.w_o > 0):
            raise ParameterRegimeError(f"k_o and w_o must be positive, got {self.k_o}, {self.w_o}")


def cdf_curve(cdf, snr_grid, method: str, tolerance: float = CDF_ABS_TOL) -> CdfCurve:
    grid = np.asarray(snr_grid, dtype=float)
    probs = np.array([cdf(g) for g in grid])
    return CdfCurve(grid, np.clip(probs, 0.0, 1.0), method, tolerance)


# ---------------------------------------------------------------------------
# Gamma-Gamma density and CDF
# ---------------------------------------------------------------------------


def gamma_gamma_logpdf(irradiance: float, gg: GammaGammaParams) -> float:
    if irradiance <= 0:
        return -math.inf
    a, b = gg.alpha, gg.beta
    ab = a * b
    half = 0.5 * (a + b)
    return (
        math.log(2.0)
        + half * math.log(ab)
        - math.lgamma(a)
        - math.lgamma(b)
        + (half - 1.0) * math.log(irradiance)
        + log_bessel_k(a - b, 2.0 * math.sqrt(ab * irradiance))
    )


def gamma_gamma_pdf(irradiance: float, gg: GammaGammaParams) -> float:
    return math.exp(gamma_gamma_logpdf(irradiance, gg))


def _quad(func, lo, hi, tol, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, err = integrate.quad(func, lo, hi, epsabs=tol / 10, epsrel=1e-10, limit=400, points=points)
        except IntegrationWarning as exc:
            raise NumericalFailure(f"quadrature on [{lo}, {hi}] failed: {exc}") from exc
    if not math.isfinite(value) or err > tol:
        raise NumericalFailure(f"quadrature on [{lo}, {hi}] reached error {err:.3g} > {tol:.3g}")
    return value


def _breakpoints(gg: GammaGammaParams, lo: float, hi: float):
    spread = math.sqrt(gg.scintillation_index)
    cand = [1.0 + k * spread for k in (-8, -3, -1, 0, 1, 3, 8)]
    pts = sorted({p for p in cand if lo < p < hi})
    return pts or None


def gamma_gamma_cdf(x: float, gg: GammaGammaParams, tol: float = CDF_ABS_TOL) -> float:
    """P(I <= x) for unit-mean Gamma-Gamma irradiance."""
    if x <= 0:
        return 0.0
    pdf = lambda s: gamma_gamma_pdf(s, gg)  # noqa: E731
    if x <= 1.0:
        return min(1.0, _quad(pdf, 0.0, x, tol, _breakpoints(gg, 0.0, x)))
    # upper tail is the smaller piece; integrate it to keep precision near 1
    edges = [x] + (_breakpoints(gg, x, math.inf) or [])
    tail = sum(_quad(pdf, lo, hi, tol / 4) for lo, hi in zip(edges[:-1], edges[1:]))
    tail += _quad(pdf, edges[-1], math.inf, tol / 4)
    return max(0.0, 1.0 - tail)


def fso_snr_cdf(gamma: float, mean_snr: float, gg: GammaGammaParams, tol: float = CDF_ABS_TOL) -> float:
    """CDF of gamma_FSO = mean_snr * I^2 with Gamma-Gamma I."""
    if gamma < 0:
        raise ChannelDomainError(f"gamma must be >= 0, got {gamma}")
    if not mean_snr > 0:
        raise ChannelDomainError(f"mean_snr must be > 0, got {mean_snr}")
    return gamma_gamma_cdf(math.sqrt(gamma / mean_snr), gg, tol)


# ---------------------------------------------------------------------------
# RIS-aided RF
# ---------------------------------------------------------------------------


def rf_gamma_approx(params: RfRisLinkParams) -> RfGammaApproxParams:
    """Moment-matched Gamma law for sqrt(gamma_RF) under optimal phases."""
    n = params.n_elements
    if n < 1:
        raise ParameterRegimeError("the Gamma approximation needs at least one RIS element")
    lam_sd, lam_sr, lam_rd = params.large_scale()
    k = math.pi**2 / (16.0 - math.pi**2)
    radicand = lam_sr * lam_rd
    if radicand < 0 or lam_sd < 0:
        raise ParameterRegimeError("large-scale coefficients must be non-negative")
    w = (4.0 - math.pi**2 / 4.0) * math.sqrt(radicand) / math.pi
    mean_term = math.sqrt(lam_sd * math.pi) + 2.0 * n * k * w
    var_term = 4.0 * lam_sd + 4.0 * n * k * w**2 - lam_sd * math.pi
    if var_term <= 0 or mean_term <= 0:
        raise ParameterRegimeError("degenerate RIS Gamma approximation (non-positive moments)")
    k_o = mean_term**2 / var_term
    w_o = math.sqrt(params.mean_snr_linear) * var_term / (2.0 * mean_term)
    return RfGammaApproxParams(k_o=k_o, w_o=w_o, k=k, w=w)


def rf_snr_cdf(gamma, approx: RfGammaApproxParams):
    """1 - Gamma(k_o, sqrt(gamma)/w_o) / Gamma(k_o)."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ChannelDomainError("gamma must be >= 0")
    out = gammainc(approx.k_o, np.sqrt(g) / approx.w_o)
    return float(out) if out.ndim == 0 else out


def rf_direct_snr_cdf(gamma, params: RfRisLinkParams):
    """Exact exponential CDF of the direct Rayleigh link (no RIS)."""
    lam_sd = params.large_scale()[0]
    g = np.asarray(gamma, dtype=float)
    out = -np.expm1(-g / (params.mean_snr_linear * lam_sd))
    return float(out) if out.ndim == 0 else out


def rf_outage_probability(params: RfRisLinkParams, gamma=None) -> float:
    """F_RF at ``gamma`` (default: the link's outage threshold)."""
    g = params.outage_threshold_linear if gamma is None else gamma
    if params.n_elements == 0:
        return rf_direct_snr_cdf(g, params)
    return rf_snr_cdf(g, rf_gamma_approx(params))


def hard_switching_op(fso: FsoLinkParams, rf_cdf_at_threshold: float) -> float:
    """Outage iff the FSO SNR is below its switching threshold and the RF
    backup is below its own outage threshold."""
    f_fso = fso_snr_cdf(fso.switch_threshold_linear, fso.mean_snr_linear, fso.gamma_gamma())
    return f_fso * float(rf_cdf_at_threshold)


def hybrid_link_op(fso: FsoLinkParams, rf: RfRisLinkParams | None) -> float:
    """Hard-switching outage; without an RF backup the FSO link must carry alone."""
    return hard_switching_op(fso, 1.0 if rf is None else rf_outage_probability(rf))


# ---------------------------------------------------------------------------
# O-RIS underwater hop
# ---------------------------------------------------------------------------


def cascade_gg(gg_sr: GammaGammaParams, gg_rd: GammaGammaParams) -> GammaGammaParams:
    """Gamma-Gamma stand-in for the product of two G-G legs.

    Large-scale factors merge into one Gamma with the same SI, small-scale
    factors likewise; the product's SI is reproduced exactly.
    """

    def merge(a1, a2):
        return 1.0 / (1.0 / a1 + 1.0 / a2 + 1.0 / (a1 * a2))

    return GammaGammaParams(merge(gg_sr.alpha, gg_rd.alpha), merge(gg_sr.beta, gg_rd.beta))


def gg_sum_approx(n_elements: float, per_element_cascade_si: float, shape_ratio: float = 1.0) -> GammaGammaParams:
    """G-G law of the normalized sum of ``n_elements`` i.i.d. unit-mean cascades.

    Matches SI_sum = SI / n with alpha_N / beta_N held at ``shape_ratio``.
    ``n_elements`` may be fractional (an effective count for unequal weights).
    """
    if n_elements < 1:
        raise ParameterRegimeError(f"n_elements must be >= 1, got {n_elements}")
    if not per_element_cascade_si > 0 or not shape_ratio > 0:
        raise ParameterRegimeError("SI and shape ratio must be positive")
    s = per_element_cascade_si / n_elements
    r = shape_ratio
    # s*beta^2 - (1 + 1/r)*beta - 1/r = 0, positive root
    b_lin = 1.0 + 1.0 / r
    disc = b_lin * b_lin + 4.0 * s / r
    beta = (b_lin + math.sqrt(disc)) / (2.0 * s)
    if not (beta > 0 and math.isfinite(beta)):
        raise ParameterRegimeError(f"no positive moment-matching root for SI={s}")
    return GammaGammaParams(r * beta, beta)


def uwoc_sum_params(params: UwocOrisLinkParams) -> tuple[GammaGammaParams, float]:
    """(normalized-sum G-G law, total weight sum rho_n) for ideal co-phasing."""
    rho = params.reflection_coeffs
    weight = float(np.sum(rho))
    if weight <= 0:
        raise ParameterRegimeError("all reflection coefficients are zero")
    n_eff = weight**2 / float(np.sum(rho**2))
    cgg = cascade_gg(params.gg_sr, params.gg_rd)
    return gg_sum_approx(n_eff, params.cascade_scintillation_index, cgg.alpha / cgg.beta), weight


def pointing_exponents(params, n_angles: int = _POINTING_ANGLES) -> np.ndarray:
    """Power-law exponents k(phi) such that P(h_p <= h) = mean_phi (h/A_0)^k(phi).

    Writing the two Gaussian displacements in polar form, R^2 given the
    angle is exponential, which turns the pointing CDF into an average of
    power laws over a uniform angle; equal jitters collapse it to one term.
    ``params`` is any link with ``pointing`` and ``link_length_m``.
    """
    p = params.pointing
    length = params.link_length_m
    a = (length * p.jitter_elev_rad) ** 2
    b = (length * p.jitter_azim_rad) ** 2
    phi = (np.arange(n_angles) + 0.5) * (0.5 * math.pi / n_angles)
    s2 = a * np.cos(phi) ** 2 + b * np.sin(phi) ** 2
    with np.errstate(divide="ignore"):
        return np.where(s2 > 0, p.equiv_beamwidth_m**2 / (4.0 * s2), np.inf)


def pointed_gg_cdf(v: float, gg: GammaGammaParams, k: np.ndarray, tol: float = UWOC_ABS_TOL) -> float:
    """P(h_p/A_0 * G < v) for G ~ G-G and the power-law pointing mixture.

        P = F_GG(v) + mean_phi v^k int_v^inf f_GG(s) s^-k ds
    """
    base = gamma_gamma_cdf(v, gg, tol / 2)
    finite = np.isfinite(k)
    if not np.any(finite):
        return base
    k = k[finite]
    logpdf = lambda s: gamma_gamma_logpdf(s, gg)  # noqa: E731

    def integrand(s):
        return np.exp(logpdf(s) + k * (math.log(v) - math.log(s)))

    pts = _breakpoints(gg, v, 50 * v + 10)
    edges = [v] + (pts or []) + [math.inf]
    total = np.zeros_like(k)
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            part, err, info = integrate.quad_vec(integrand, lo, hi, epsabs=tol / 20, epsrel=1e-9,
                                                 limit=400, full_output=True)
        if not info.success or not np.all(np.isfinite(part)) or err > tol / 4:
            raise NumericalFailure(f"pointing integral on [{lo}, {hi}] failed (err={err:.3g})")
        total += part
    # angles with zero displacement contribute 0 (h_p = A_0 there)
    p = base + float(np.sum(total)) / finite.size
    return min(max(p, 0.0), 1.0)


def uwoc_oris_op(params: UwocOrisLinkParams, gamma: float, tol: float = UWOC_ABS_TOL) -> float:
    """P(mean_snr * (h_l h_p sum_n rho_n G_n)^2 < gamma) under ideal phases.

    The sum is replaced by its G-G approximation and the pointing fade is
    integrated out exactly.
    """
    if gamma < 0:
        raise ChannelDomainError("gamma must be >= 0")
    if gamma == 0:
        return 0.0
    gg, weight = uwoc_sum_params(params)
    a0 = params.pointing.collected_fraction
    v = math.sqrt(gamma / params.mean_snr_linear) / (params.path_loss * weight * a0)
    return pointed_gg_cdf(v, gg, pointing_exponents(params), tol)


def uwoc_direct_op(params: UwocDirectLinkParams, gamma: float | None = None, tol: float = UWOC_ABS_TOL) -> float:
    """Outage of the line-of-sight link, P(mean_snr * (h_l h_p G)^2 < gamma)."""
    gamma = params.outage_threshold_linear if gamma is None else gamma
    if gamma < 0:
        raise ChannelDomainError("gamma must be >= 0")
    if gamma == 0:
        return 0.0
    v = math.sqrt(gamma / params.mean_snr_linear) / (params.path_loss * params.pointing.collected_fraction)
    return pointed_gg_cdf(v, params.gg, pointing_exponents(params), tol)


def uwoc_direct_scale(params: UwocOrisLinkParams) -> float:
    """Deterministic-channel SNR gamma_bar (h_l A_0 sum rho)^2 (step location)."""
    weight = float(np.sum(params.reflection_coeffs))
    return params.mean_snr_linear * (params.path_loss * params.pointing.collected_fraction * weight) ** 2


# ---------------------------------------------------------------------------
# Dual-hop composition
# ---------------------------------------------------------------------------


def e2e_op(op1, op2):
    """DF end-to-end outage of two independent hops."""
    a = np.asarray(op1, dtype=float)
    b = np.asarray(op2, dtype=float)
    if np.any((a < 0) | (a > 1)) or np.any((b < 0) | (b > 1)):
        raise ValueError("per-hop outage probabilities must lie in [0, 1]")
    out = a + b - a * b
    return float(out) if out.ndim == 0 else out
