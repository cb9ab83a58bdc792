import math

import numpy as np
import pytest

from gradcheck import actor_gradient_relative_error
from dualhop.drl.agents import (
    Batch,
    ReplayBuffer,
    Transition,
    actor_update_td3,
    build_actor_critic,
    critic_update_td3,
    ddpg_targets,
    exploration_action,
    td3_targets,
    update_ddpg,
    update_targets,
)
from dualhop.drl.env import AgentConfig, quantize_action
from dualhop.drl.mlp import MlpParams, mlp_forward

N = 3
SMALL = AgentConfig(hidden=(16, 16), batch_size=8)


def _nets(cfg=SMALL, seed=0, n_critics=2):
    return build_actor_critic(N, 1.0, cfg, np.random.default_rng(seed), n_critics)


def _batch(seed=1, size=8):
    rng = np.random.default_rng(seed)
    return Batch(rng.normal(size=(size, 4 * N)), quantize_action(rng.uniform(-math.pi, math.pi, (size, N)), 3),
                 rng.uniform(0, 1, size), rng.normal(size=(size, 4 * N)))


def _const_critic(value, in_dim):
    return MlpParams([np.zeros((in_dim, 1))], [np.array([float(value)])], ["linear"])


def _snapshot(nets):
    return [a.copy() for p in [nets.actor, nets.actor_target, *nets.critics, *nets.critic_targets] for a in p.arrays()]


def test_zero_discount_targets_are_rewards():
    cfg = AgentConfig(hidden=(16, 16), discount=0.0)
    nets, b = _nets(cfg), _batch()
    assert np.array_equal(td3_targets(b, nets, cfg, np.random.default_rng(0)), b.rewards)
    assert np.array_equal(ddpg_targets(b, _nets(cfg, n_critics=1), cfg), b.rewards)


def test_clipped_double_q_takes_min():
    cfg = AgentConfig(hidden=(16, 16), discount=0.5)
    nets, b = _nets(cfg), _batch()
    nets.critic_targets = [_const_critic(2.0, 5 * N), _const_critic(5.0, 5 * N)]
    y = td3_targets(b, nets, cfg, np.random.default_rng(0))
    assert np.allclose(y, b.rewards + 0.5 * 2.0)
    # never above the single-critic target built from either critic
    for k in range(2):
        single = nets.critic_targets[k]
        nets1 = _nets(cfg, n_critics=1)
        nets1.critic_targets = [single]
        nets1.actor_target = nets.actor_target
        assert np.all(y <= ddpg_targets(b, nets1, cfg) + 1e-12)


def test_noiseless_target_action_is_clipped_actor():
    cfg = AgentConfig(hidden=(16, 16), target_noise_std=0.0, discount=0.9)
    nets, b = _nets(cfg), _batch()
    # identity-like critic on the action block: Q = sum(a / pi)
    w = np.zeros((5 * N, 1))
    w[4 * N:, 0] = 1.0
    nets.critic_targets = [MlpParams([w], [np.zeros(1)], ["linear"])] * 2
    a2, _ = mlp_forward(nets.actor_target, nets.scale(b.next_states))
    y = td3_targets(b, nets, cfg, np.random.default_rng(0))
    assert np.allclose(y, b.rewards + 0.9 * np.sum(np.clip(a2, -math.pi, math.pi) / math.pi, axis=1))


def test_delayed_actor_is_bitwise_unchanged():
    cfg = AgentConfig(hidden=(16, 16), policy_delay=2)
    nets, b = _nets(cfg), _batch()
    before = _snapshot(nets)
    assert actor_update_td3(b, nets, cfg, step_index=3) is False
    assert all(np.array_equal(x, y) for x, y in zip(before, _snapshot(nets)))
    assert actor_update_td3(b, nets, cfg, step_index=4) is True
    assert not np.array_equal(before[0], nets.actor.weights[0])


def test_tau_one_copies_targets():
    nets, b = _nets(), _batch()
    critic_update_td3(b, nets, SMALL, np.random.default_rng(0))
    update_targets(nets, 1.0)
    for t, s in zip([nets.actor_target, *nets.critic_targets], [nets.actor, *nets.critics]):
        assert all(np.array_equal(x, y) for x, y in zip(t.arrays(), s.arrays()))


def test_critic_update_reduces_loss_and_handles_empty():
    cfg = AgentConfig(hidden=(16, 16), discount=0.0)
    nets, b = _nets(cfg), _batch(size=32)
    first = critic_update_td3(b, nets, cfg, np.random.default_rng(0))
    for _ in range(200):
        last = critic_update_td3(b, nets, cfg, np.random.default_rng(0))
    assert len(first) == 2 and max(last) < 0.2 * min(first)
    assert critic_update_td3(None, nets, cfg, np.random.default_rng(0)) is None
    assert update_ddpg(None, _nets(cfg, n_critics=1), cfg) is None


def test_ddpg_update_deterministic():
    a, b = _nets(n_critics=1), _nets(n_critics=1)
    batch = _batch()
    update_ddpg(batch, a, SMALL)
    update_ddpg(batch, b, SMALL)
    assert all(np.array_equal(x, y) for x, y in zip(_snapshot(a), _snapshot(b)))


def test_actor_gradient_matches_finite_differences():
    assert actor_gradient_relative_error(np.random.default_rng(0)) <= 1e-3


def test_exploration_stays_in_range():
    nets = _nets()
    rng = np.random.default_rng(2)
    a = np.array([exploration_action(nets, rng.normal(size=4 * N), AgentConfig(explore_std=3.0), rng)
                  for _ in range(200)])
    assert np.all(np.abs(a) <= math.pi)
    quiet = exploration_action(nets, np.ones(4 * N), AgentConfig(explore_std=0.0), rng)
    assert np.array_equal(quiet, nets.act(np.ones(4 * N)))


def test_replay_buffer_ring():
    buf = ReplayBuffer(3, 2, 1)
    rng = np.random.default_rng(0)
    assert buf.sample(rng, 1) is None
    for i in range(5):
        buf.add(Transition(np.full(2, i), np.array([i]), float(i), np.full(2, i + 1)))
    assert len(buf) == 3
    assert sorted(buf.rewards.tolist()) == [2.0, 3.0, 4.0]
    assert buf.sample(rng, 4) is None
    assert buf.sample(rng, 3).states.shape == (3, 2)
    with pytest.raises(ValueError):
        Transition(np.zeros(2), np.zeros(1), float("nan"), np.zeros(2))
