import csv
import math

import numpy as np
import pytest

from conftest import make_uwoc
from dualhop.drl.agents import build_actor_critic
from dualhop.drl.env import AgentConfig, env_reset, is_quantized
from dualhop.drl.training import (
    FrozenPolicy,
    RandomPolicy,
    evaluate_policy,
    load_checkpoint,
    rms_amplitude,
    save_checkpoint,
    train,
    write_training_log,
)
from dualhop.montecarlo import McConfig
from dualhop.rng import stream

LINK = make_uwoc(n=4, mean_snr_db=30)
TINY = AgentConfig(hidden=(16, 16), batch_size=8, n_episodes=4, steps_per_episode=20)


@pytest.fixture(scope="module")
def trained():
    return train(LINK, TINY, master_seed=3)


def test_same_seed_same_log(trained):
    again = train(LINK, TINY, master_seed=3)
    assert again.log == trained.log
    assert all(np.array_equal(a, b) for a, b in zip(again.td3.actor.arrays(), trained.td3.actor.arrays()))
    other = train(LINK, TINY, master_seed=4)
    assert other.log != trained.log


def test_log_layout(trained, tmp_path):
    assert len(trained.log) == 3 * TINY.n_episodes
    assert [row[1] for row in trained.log[:3]] == ["td3", "ddpg", "random"]
    path = tmp_path / "log.csv"
    write_training_log(path, trained.log)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["episode", "arm", "mean_reward", "std_reward"]
    assert len(rows) == 1 + len(trained.log)
    assert all(float(r[2]) <= 1.0 for r in rows[1:])


def test_zero_learning_rates_leave_actor_untouched():
    cfg = AgentConfig(hidden=(16, 16), batch_size=8, n_episodes=2, steps_per_episode=20, actor_lr=0.0, critic_lr=0.0)
    res = train(LINK, cfg, master_seed=5, arms=("td3", "ddpg"))
    for arm, nets, k in (("td3", res.td3, 2), ("ddpg", res.ddpg, 1)):
        init = build_actor_critic(4, rms_amplitude(LINK), cfg, stream(5, "init", arm), n_critics=k)
        assert all(np.array_equal(a, b) for a, b in zip(init.actor.arrays(), nets.actor.arrays()))


def test_final_mean_reports_se(trained):
    mean, se = trained.final_mean("random", last=3)
    assert mean == pytest.approx(np.mean(trained.rewards("random")[-3:]))
    assert se > 0


def test_checkpoint_roundtrip_bit_exact(trained, tmp_path):
    rng = np.random.default_rng(77)
    rng.standard_normal(3)
    path = tmp_path / "td3.npz"
    save_checkpoint(path, trained.td3, TINY, rng)
    nets, cfg, rng2 = load_checkpoint(path)
    assert cfg == TINY
    src = trained.td3
    pairs = [(src.actor, nets.actor), (src.actor_target, nets.actor_target)]
    pairs += list(zip(src.critics, nets.critics)) + list(zip(src.critic_targets, nets.critic_targets))
    for a, b in pairs:
        assert a.activations == b.activations
        assert all(np.array_equal(x, y) and x.dtype == y.dtype for x, y in zip(a.arrays(), b.arrays()))
    assert nets.actor_opt.t == src.actor_opt.t
    assert all(np.array_equal(x, y) for x, y in zip(nets.actor_opt.m, src.actor_opt.m))
    assert np.array_equal(nets.obs_scale, src.obs_scale)
    assert np.array_equal(rng2.standard_normal(5), rng.standard_normal(5))


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, header=np.frombuffer(b'{"format": "other"}', dtype=np.uint8))
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_frozen_policy_outputs_grid_phases(trained):
    pol = FrozenPolicy.from_nets(trained.td3, TINY.bits)
    s = env_reset(LINK, TINY, np.random.default_rng(0))
    assert is_quantized(pol(s.vector()), TINY.bits)
    batch = np.stack([env_reset(LINK, TINY, np.random.default_rng(i)).vector() for i in range(10)])
    assert is_quantized(pol(batch), TINY.bits)
    assert is_quantized(RandomPolicy(3)(batch, np.random.default_rng(1)), 3)


def test_random_baseline_op_decreases_in_snr():
    link = make_uwoc(n=32)
    grid = 10 ** (np.arange(20, 50, 3) / 10)
    res = evaluate_policy("random", link, AgentConfig(), grid, McConfig(n_trials=20_000, batch_size=10_000))
    p = [r.outage_probability for r in res]
    assert all(a >= b for a, b in zip(p, p[1:])) and p[0] > p[-1]


def test_evaluation_shares_channels(trained):
    grid = [10**3]
    mc = McConfig(n_trials=2000, batch_size=1000)
    a = evaluate_policy(trained.td3, LINK, TINY, grid, mc)
    b = evaluate_policy(trained.td3, LINK, TINY, grid, McConfig(n_trials=2000, batch_size=1000, n_workers=2))
    assert a == b
    # a policy that always picks the same phase is deterministic in the channel only
    fixed = lambda obs, rng: np.zeros(obs.shape[:-1] + (4,))  # noqa: E731
    f1 = evaluate_policy(fixed, LINK, TINY, grid, mc)
    f2 = evaluate_policy(fixed, LINK, TINY, grid, mc)
    assert f1 == f2
