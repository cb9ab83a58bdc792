"""Replay buffer and deterministic actor-critic updates (TD3 and DDPG).

Networks see scaled inputs: magnitudes are divided by the element RMS
amplitude, phases by pi, and actions by pi. The scaling is part of the
network bundle so checkpoints carry it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import AgentConfig
from .mlp import Adam, MlpParams, init_mlp, mlp_backward, mlp_forward, polyak_update


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.reward):
            raise ValueError("reward must be finite")
        if self.state.shape != self.next_state.shape:
            raise ValueError("state and next_state shapes differ")


@dataclass(frozen=True)
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, t: Transition):
        i = self.cursor
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int) -> Batch | None:
        """Uniform minibatch with replacement, or None while underfilled."""
        if self.size < batch_size:
            return None
        idx = rng.integers(0, self.size, batch_size)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])


@dataclass
class ActorCritic:
    """Online and target networks plus their optimizers.

    ``critics`` has two entries for TD3 and one for DDPG.
    """

    obs_scale: np.ndarray
    actor: MlpParams
    critics: list[MlpParams]
    actor_target: MlpParams
    critic_targets: list[MlpParams]
    actor_opt: Adam = field(repr=False)
    critic_opts: list[Adam] = field(repr=False)

    @property
    def n_elements(self) -> int:
        return self.actor.out_dim

    def scale(self, obs):
        return np.asarray(obs) * self.obs_scale

    def act(self, obs):
        """Noise-free continuous actor output for raw observations."""
        out, _ = mlp_forward(self.actor, self.scale(obs))
        return out


def obs_scale_for(n_elements: int, rms_amplitude: float) -> np.ndarray:
    mag = np.full(n_elements, 1.0 / rms_amplitude)
    ph = np.full(n_elements, 1.0 / math.pi)
    return np.concatenate([mag, ph, mag, ph])


def build_actor_critic(n_elements: int, rms_amplitude: float, cfg: AgentConfig, rng: np.random.Generator,
                       n_critics: int) -> ActorCritic:
    s_dim = 4 * n_elements
    hidden = list(cfg.hidden)
    actor = init_mlp([s_dim, *hidden, n_elements], ["relu"] * len(hidden) + ["pi_tanh"], rng)
    critics = [
        init_mlp([s_dim + n_elements, *hidden, 1], ["relu"] * len(hidden) + ["linear"], rng)
        for _ in range(n_critics)
    ]
    return ActorCritic(
        obs_scale=obs_scale_for(n_elements, rms_amplitude),
        actor=actor,
        critics=critics,
        actor_target=actor.copy(),
        critic_targets=[c.copy() for c in critics],
        actor_opt=Adam(actor, cfg.actor_lr),
        critic_opts=[Adam(c, cfg.critic_lr) for c in critics],
    )


def critic_input(scaled_obs, actions):
    return np.concatenate([scaled_obs, np.asarray(actions) / math.pi], axis=-1)


def _q(params, scaled_obs, actions):
    out, cache = mlp_forward(params, critic_input(scaled_obs, actions))
    return out[:, 0], cache


def td3_targets(batch: Batch, nets: ActorCritic, cfg: AgentConfig, rng: np.random.Generator):
    """r + discount * min_i Q_i'(s', clip(mu'(s') + clipped noise))."""
    s2 = nets.scale(batch.next_states)
    a2, _ = mlp_forward(nets.actor_target, s2)
    if cfg.target_noise_std > 0:
        c = cfg.target_noise_clip * math.pi
        noise = np.clip(rng.normal(0.0, cfg.target_noise_std * math.pi, a2.shape), -c, c)
        a2 = a2 + noise
    a2 = np.clip(a2, -math.pi, math.pi)
    q_next = np.min(np.stack([_q(t, s2, a2)[0] for t in nets.critic_targets]), axis=0)
    return batch.rewards + cfg.discount * q_next


def ddpg_targets(batch: Batch, nets: ActorCritic, cfg: AgentConfig):
    s2 = nets.scale(batch.next_states)
    a2, _ = mlp_forward(nets.actor_target, s2)
    return batch.rewards + cfg.discount * _q(nets.critic_targets[0], s2, a2)[0]


def _regress_critics(batch: Batch, nets: ActorCritic, y) -> list[float]:
    s = nets.scale(batch.states)
    losses = []
    for critic, opt in zip(nets.critics, nets.critic_opts):
        q, cache = _q(critic, s, batch.actions)
        err = q - y
        losses.append(float(np.mean(err * err)))
        gw, gb, _ = mlp_backward(critic, cache, (2.0 / len(y)) * err[:, None])
        opt.step(gw, gb)
    return losses


def critic_update_td3(batch: Batch | None, nets: ActorCritic, cfg: AgentConfig, rng: np.random.Generator):
    """One squared-loss step of both critics toward the clipped double-Q target.

    Returns the per-critic losses, or None (no update) for an empty batch.
    """
    if batch is None:
        return None
    return _regress_critics(batch, nets, td3_targets(batch, nets, cfg, rng))


def actor_gradient(batch: Batch, nets: ActorCritic):
    """Gradients of -mean_j Q_1(s_j, mu(s_j)) with respect to the actor."""
    s = nets.scale(batch.states)
    a, a_cache = mlp_forward(nets.actor, s)
    _, q_cache = _q(nets.critics[0], s, a)
    n = a.shape[0]
    _, _, g_in = mlp_backward(nets.critics[0], q_cache, np.full((n, 1), -1.0 / n))
    g_action = g_in[:, s.shape[1]:] / math.pi
    gw, gb, _ = mlp_backward(nets.actor, a_cache, g_action)
    return gw, gb


def update_targets(nets: ActorCritic, tau: float):
    polyak_update(nets.actor_target, nets.actor, tau)
    for t, c in zip(nets.critic_targets, nets.critics):
        polyak_update(t, c, tau)


def actor_update_td3(batch: Batch | None, nets: ActorCritic, cfg: AgentConfig, step_index: int) -> bool:
    """Delayed policy step plus target tracking; runs only when d divides step_index."""
    if step_index < 0:
        raise ValueError("step_index must be non-negative")
    if batch is None or step_index % cfg.policy_delay != 0:
        return False
    gw, gb = actor_gradient(batch, nets)
    nets.actor_opt.step(gw, gb)
    update_targets(nets, cfg.polyak)
    return True


def update_ddpg(batch: Batch | None, nets: ActorCritic, cfg: AgentConfig):
    """Critic step, actor step and target tracking, every call."""
    if batch is None:
        return None
    losses = _regress_critics(batch, nets, ddpg_targets(batch, nets, cfg))
    gw, gb = actor_gradient(batch, nets)
    nets.actor_opt.step(gw, gb)
    update_targets(nets, cfg.polyak)
    return losses


def exploration_action(nets: ActorCritic, obs, cfg: AgentConfig, rng: np.random.Generator):
    """Actor output plus clipped Gaussian noise, clipped to [-pi, pi] (not yet quantized)."""
    a = nets.act(obs)
    if cfg.explore_std > 0:
        c = cfg.explore_clip * math.pi
        a = a + np.clip(rng.normal(0.0, cfg.explore_std * math.pi, a.shape), -c, c)
    return np.clip(a, -math.pi, math.pi)
