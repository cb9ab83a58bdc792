"""Scalar special functions used by the analytic CDFs.

The modified Bessel function of the second kind is evaluated with the
classic two-regime scheme:

* ``x <= 2``: Temme's series for K_mu and K_{mu+1}, |mu| <= 1/2.
* ``x > 2``: Steed's continued fraction (CF2, Thompson-Barnett form),
  which returns exp(x) * K_mu directly and so never underflows.

Orders outside [-1/2, 1/2] are reached by forward recurrence
K_{v+1} = K_{v-1} + (2v/x) K_v, which is stable for K. The recurrence is
carried out on rescaled values so that large orders do not overflow; the
public entry point therefore returns log K_nu(x).
"""

from __future__ import annotations

import math

_EPS = 1e-16
_MAX_ITER = 10_000
_EULER = 0.5772156649015329
# Taylor coefficients of 1/Gamma(1+z) = sum c_k z^(k-1); c_4 for the gam1 tail.
_RGAMMA_C4 = -0.0420026350340952
_RGAMMA_C6 = -0.0421977345555443


class SpecialFunctionError(ArithmeticError):
    """Raised when a series or continued fraction fails to converge."""


def _gam1_gam2(mu: float) -> tuple[float, float, float, float]:
    """Temme's auxiliary gamma combinations for |mu| <= 1/2.

    Returns (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)).
    """
    gampl = 1.0 / math.gamma(1.0 + mu)
    gammi = 1.0 / math.gamma(1.0 - mu)
    gam2 = 0.5 * (gammi + gampl)
    if abs(mu) < 1e-3:
        mu2 = mu * mu
        gam1 = -(_EULER + _RGAMMA_C4 * mu2 + _RGAMMA_C6 * mu2 * mu2)
    else:
        gam1 = (gammi - gampl) / (2.0 * mu)
    return gam1, gam2, gampl, gammi


def _k_temme(mu: float, x: float) -> tuple[float, float]:
    """K_mu(x), K_{mu+1}(x) by Temme's series, valid for x <= 2."""
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -math.log(x2)
    e = mu * d
    fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
    gam1, gam2, gampl, gammi = _gam1_gam2(mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    total = ff
    e = math.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = 1.0
    d = x2 * x2
    total1 = p
    mu2 = mu * mu
    for i in range(1, _MAX_ITER):
        ff = (i * ff + p + q) / (i * i - mu2)
        c *= d / i
        p /= i - mu
        q /= i + mu
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if abs(delta) < abs(total) * _EPS:
            break
    else:
        raise SpecialFunctionError(f"Temme series did not converge (mu={mu}, x={x})")
    return total, total1 * 2.0 / x


def _k_steed_scaled(mu: float, x: float) -> tuple[float, float]:
    """exp(x) K_mu(x), exp(x) K_{mu+1}(x) by Steed's CF2, valid for x > 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu * mu
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAX_ITER):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:
        raise SpecialFunctionError(f"Steed CF2 did not converge (mu={mu}, x={x})")
    h = a1 * h
    kmu = math.sqrt(math.pi / (2.0 * x)) / s
    k1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, k1


def log_bessel_k(nu: float, x: float) -> float:
    """Natural log of the modified Bessel function K_nu(x), x > 0."""
    if not x > 0.0:
        raise ValueError(f"log_bessel_k requires x > 0, got {x}")
    nu = abs(nu)
    nl = int(nu + 0.5)
    mu = nu - nl
    if x <= 2.0:
        kmu, k1 = _k_temme(mu, x)
        log_scale = 0.0
    else:
        kmu, k1 = _k_steed_scaled(mu, x)
        log_scale = -x
    for i in range(1, nl + 1):
        kmu, k1 = k1, (mu + i) * (2.0 / x) * k1 + kmu
        if k1 > 1e280:
            kmu /= 1e280
            k1 /= 1e280
            log_scale += 280.0 * math.log(10.0)
    return math.log(kmu) + log_scale


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind K_nu(x)."""
    return math.exp(log_bessel_k(nu, x))


def gaussian_q(x):
    """Gaussian tail probability Q(x) = P(Z > x)."""
    from scipy.special import erfc

    return 0.5 * erfc(x / math.sqrt(2.0))
