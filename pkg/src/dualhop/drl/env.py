"""O-RIS phase-control environment.

The agent observes per-element cascade coefficients (current and outdated),
picks one quantized phase per element and is rewarded for clearing the SNR
threshold. Element amplitudes follow a phase-dependent reflection model, so
the best phase is not simply the negated channel phase.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..channels import UwocOrisLinkParams, sample_uwoc_cascade, wrap_phase
from ..special import gaussian_q

LOG2E = math.log2(math.e)


class ContractViolation(ValueError):
    """An operation was called outside its documented preconditions."""


@dataclass(frozen=True)
class AgentConfig:
    """Hyper-parameters of the environment, both agents and the training loop.

    Noise standard deviations and clips are fractions of the action bound
    ``pi`` (so ``explore_std=0.1`` means 0.1*pi radians).
    """

    discount: float = 0.99
    polyak: float = 0.005
    policy_delay: int = 2
    explore_std: float = 0.1
    explore_clip: float = 0.5
    target_noise_std: float = 0.2
    target_noise_clip: float = 0.5
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    batch_size: int = 64
    hidden: tuple[int, ...] = (256, 256)
    buffer_size: int = 100_000
    bits: int = 3
    n_episodes: int = 200
    steps_per_episode: int = 100
    reward_weight: float = 0.7
    phase_penalty: float = 1e-3
    snr_threshold_linear: float = 10**1.5
    fbl_channel_uses: int = 256
    fbl_info_bits: int = 128
    fbl_target_error: float = 1e-5
    csi_correlation: float = 0.95
    beta_min: float = 0.72
    amplitude_exponent: float = 1.6
    amplitude_offset: float = 0.43 * math.pi

    def __post_init__(self):
        if not 0 <= self.discount < 1:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        if not 0 < self.polyak <= 1:
            raise ValueError(f"polyak must lie in (0, 1], got {self.polyak}")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        if not 0 <= self.reward_weight <= 1:
            raise ValueError("reward_weight must lie in [0, 1]")
        if not 0 <= self.csi_correlation <= 1:
            raise ValueError("csi_correlation must lie in [0, 1]")
        if not 0 <= self.beta_min <= 1:
            raise ValueError("beta_min must lie in [0, 1]")
        if self.snr_threshold_linear <= 0:
            raise ValueError("snr_threshold_linear must be positive")
        if min(self.batch_size, self.buffer_size, self.n_episodes, self.steps_per_episode) < 1:
            raise ValueError("batch, buffer, episode and step counts must be >= 1")
        if min(self.explore_std, self.explore_clip, self.target_noise_std, self.target_noise_clip) < 0:
            raise ValueError("noise parameters must be non-negative")
        if min(self.actor_lr, self.critic_lr, self.phase_penalty) < 0:
            raise ValueError("learning rates and penalty must be non-negative")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        return cls(**{**d, "hidden": tuple(d.get("hidden", cls.hidden))})


@dataclass
class MdpState:
    """Current and outdated per-element cascade plus the last applied phases."""

    h: np.ndarray
    h_old: np.ndarray
    prev_action: np.ndarray

    def __post_init__(self):
        if self.h.shape != self.h_old.shape or self.h.shape != self.prev_action.shape:
            raise ContractViolation("state components must share one shape")
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.h_old))):
            raise ContractViolation("state entries must be finite")

    @property
    def n_elements(self) -> int:
        return self.h.shape[-1]

    def vector(self) -> np.ndarray:
        """Flattened 4N observation [|h|, angle h, |h_old|, angle h_old]."""
        return observation(self.h, self.h_old)


@dataclass(frozen=True)
class Action:
    continuous: np.ndarray
    quantized: np.ndarray = field(default=None)  # type: ignore[assignment]
    bits: int = 3

    def __post_init__(self):
        if self.quantized is None:
            object.__setattr__(self, "quantized", quantize_action(self.continuous, self.bits))


def observation(h, h_old) -> np.ndarray:
    """Per-element magnitudes and phases, batched over leading axes."""
    return np.concatenate(
        [np.abs(h), wrap_phase(np.angle(h)), np.abs(h_old), wrap_phase(np.angle(h_old))], axis=-1
    )


def amplitude_of_phase(theta, cfg: AgentConfig):
    """Reflection amplitude in [beta_min, 1] as a function of the applied phase."""
    s = (np.sin(np.asarray(theta, dtype=float) - cfg.amplitude_offset) + 1.0) / 2.0
    s = np.clip(s, 0.0, 1.0)
    return (1.0 - cfg.beta_min) * s**cfg.amplitude_exponent + cfg.beta_min


def phase_grid(bits: int) -> np.ndarray:
    return -math.pi + (2 * math.pi / 2**bits) * np.arange(2**bits)


def quantize_action(theta, bits: int) -> np.ndarray:
    """Nearest level of {-pi + q*Delta}; ties go to the lower level.

    Levels do not wrap, so values just below pi map to the top level pi - Delta.
    """
    levels = 2**bits
    delta = 2 * math.pi / levels
    x = (np.asarray(theta, dtype=float) + math.pi) / delta
    q = np.clip(np.ceil(x - 0.5), 0, levels - 1)
    return -math.pi + q * delta


def is_quantized(theta, bits: int, atol: float = 1e-9) -> bool:
    theta = np.asarray(theta, dtype=float)
    return bool(np.all(np.abs(theta - quantize_action(theta, bits)) <= atol))


def outdated_csi_step(h_current, rho_d: float, rng: np.random.Generator, power=None):
    """Stale estimate rho*h + e with e ~ CN(0, (1 - rho^2) * power).

    ``power`` is the stationary per-element power (scalar or per element);
    by default the instantaneous |h|^2 is used.
    """
    if not 0 <= rho_d <= 1:
        raise ContractViolation(f"rho_d must lie in [0, 1], got {rho_d}")
    h = np.asarray(h_current, dtype=complex)
    p = np.abs(h) ** 2 if power is None else np.broadcast_to(np.asarray(power, dtype=float), h.shape)
    scale = np.sqrt((1.0 - rho_d**2) * p / 2.0)
    noise = rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)
    return rho_d * h + scale * noise


def channel_dispersion(snr):
    snr = np.asarray(snr, dtype=float)
    return (1.0 - (1.0 + snr) ** -2) * LOG2E**2


def fbl_error_probability(snr, m: int, info_bits: int):
    """Normal-approximation block error for ``info_bits`` over ``m`` channel uses.

    At zero SNR the dispersion vanishes and the error is 1 by convention.
    """
    if m < 1 or info_bits < 1:
        raise ContractViolation("m and info_bits must be >= 1")
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ContractViolation("snr must be non-negative")
    v = channel_dispersion(snr)
    safe_v = np.where(v > 0, v, 1.0)
    arg = np.sqrt(m / safe_v) * (np.log2(1.0 + snr) - info_bits / m)
    eps = np.where(v > 0, gaussian_q(arg), 1.0)
    return eps if eps.ndim else float(eps)


def fbl_rate(snr, m: int, target_error: float, tau: float = 1.0):
    """Achievable rate log2(1 + tau*snr) - sqrt(V/m) * Qinv(eps), floored at 0."""
    from scipy.special import ndtri

    snr = np.asarray(snr, dtype=float)
    r = np.log2(1.0 + tau * snr) - np.sqrt(channel_dispersion(snr) / m) * -ndtri(target_error)
    r = np.maximum(r, 0.0)
    return r if r.ndim else float(r)


def reward_terms(gamma_inst, gamma_th: float):
    """(indicator, shortfall) terms; each lies in [0, 1]."""
    g = np.asarray(gamma_inst, dtype=float)
    above = (g >= gamma_th).astype(float)
    shortfall = 1.0 - np.maximum(0.0, gamma_th - g) / gamma_th
    return above, shortfall


def reward(gamma_inst, gamma_th: float, alpha_r: float, lambda_reg: float, theta_now, theta_prev):
    """Weighted threshold reward minus a wrapped phase-change penalty."""
    if gamma_th <= 0:
        raise ContractViolation("gamma_th must be positive")
    if not 0 <= alpha_r <= 1:
        raise ContractViolation("alpha_r must lie in [0, 1]")
    above, shortfall = reward_terms(gamma_inst, gamma_th)
    diff = wrap_phase(np.asarray(theta_now, dtype=float) - np.asarray(theta_prev, dtype=float))
    r = alpha_r * above + (1 - alpha_r) * shortfall - lambda_reg * np.sum(diff * diff, axis=-1)
    return r if np.ndim(r) else float(r)


def combined_gain(h, theta_q, link: UwocOrisLinkParams, cfg: AgentConfig):
    """|sum_n h_n rho_n beta_n(theta_n) e^{j theta_n}|^2, batched over leading axes."""
    beta = amplitude_of_phase(theta_q, cfg)
    s = np.sum(h * link.reflection_coeffs * beta * np.exp(1j * theta_q), axis=-1)
    return np.abs(s) ** 2


def _draw_cascade(link, rng, size=None):
    return sample_uwoc_cascade(link, rng, size).coefficients


def env_reset(link: UwocOrisLinkParams, cfg: AgentConfig, rng: np.random.Generator) -> MdpState:
    h = _draw_cascade(link, rng)
    h_old = outdated_csi_step(h, cfg.csi_correlation, rng, link.element_power())
    prev = quantize_action(rng.uniform(-math.pi, math.pi, link.n_elements), cfg.bits)
    return MdpState(h, h_old, prev)


def env_step(state: MdpState, action, link: UwocOrisLinkParams, cfg: AgentConfig, rng: np.random.Generator,
             advance_channel: bool = True):
    """Apply quantized phases, score them and move to the next channel.

    With ``advance_channel=False`` the channel is frozen and only the stored
    previous action changes.
    """
    theta = action.quantized if isinstance(action, Action) else np.asarray(action, dtype=float)
    if theta.shape != state.h.shape:
        raise ContractViolation(f"action shape {theta.shape} != {state.h.shape}")
    if not is_quantized(theta, cfg.bits):
        raise ContractViolation("action must lie on the quantization grid")
    snr = link.mean_snr_linear * combined_gain(state.h, theta, link, cfg)
    r = reward(snr, cfg.snr_threshold_linear, cfg.reward_weight, cfg.phase_penalty, theta, state.prev_action)
    info = {
        "snr": float(snr),
        "epsilon": fbl_error_probability(snr, cfg.fbl_channel_uses, cfg.fbl_info_bits),
        "rate": fbl_rate(snr, cfg.fbl_channel_uses, cfg.fbl_target_error),
    }
    if advance_channel:
        h_old = outdated_csi_step(state.h, cfg.csi_correlation, rng, link.element_power())
        nxt = MdpState(_draw_cascade(link, rng), h_old, theta.copy())
    else:
        nxt = MdpState(state.h, state.h_old, theta.copy())
    return nxt, r, info
