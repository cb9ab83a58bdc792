"""Training loop for the three arms, policy evaluation and checkpoints."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from ..channels import UwocOrisLinkParams, sample_uwoc_cascade
from ..montecarlo import McConfig, simulate
from ..rng import stream
from .agents import (
    ActorCritic,
    ReplayBuffer,
    Transition,
    actor_update_td3,
    build_actor_critic,
    critic_update_td3,
    exploration_action,
    update_ddpg,
)
from .env import (
    AgentConfig,
    MdpState,
    combined_gain,
    env_reset,
    env_step,
    observation,
    outdated_csi_step,
    quantize_action,
)
from .mlp import Adam, MlpParams, mlp_forward

ARMS = ("td3", "ddpg", "random")
LOG_COLUMNS = ("episode", "arm", "mean_reward", "std_reward")
CHECKPOINT_FORMAT = "dualhop-actor-critic"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class FrozenPolicy:
    """Read-only actor used for evaluation; safe to ship to worker processes."""

    actor: MlpParams
    obs_scale: np.ndarray
    bits: int

    @classmethod
    def from_nets(cls, nets: ActorCritic, bits: int) -> "FrozenPolicy":
        return cls(nets.actor.copy(), nets.obs_scale.copy(), bits)

    def __call__(self, obs, rng=None):
        out, _ = mlp_forward(self.actor, np.asarray(obs) * self.obs_scale)
        return quantize_action(out, self.bits)


@dataclass(frozen=True)
class RandomPolicy:
    """Uniform phases on [-pi, pi), then quantized."""

    bits: int

    def __call__(self, obs, rng):
        n = obs.shape[-1] // 4
        return quantize_action(rng.uniform(-math.pi, math.pi, obs.shape[:-1] + (n,)), self.bits)


@dataclass
class TrainResult:
    td3: ActorCritic | None
    ddpg: ActorCritic | None
    log: list[tuple[int, str, float, float]]

    def rewards(self, arm: str) -> np.ndarray:
        return np.array([row[2] for row in self.log if row[1] == arm])

    def final_mean(self, arm: str, last: int = 10) -> tuple[float, float]:
        """Mean of the last ``last`` episode means and its standard error."""
        r = self.rewards(arm)[-last:]
        se = float(np.std(r, ddof=1) / math.sqrt(len(r))) if len(r) > 1 else 0.0
        return float(np.mean(r)), se


def rms_amplitude(link: UwocOrisLinkParams) -> float:
    return math.sqrt(link.element_power())


def _run_arm(arm: str, link: UwocOrisLinkParams, cfg: AgentConfig, master_seed: int,
             frozen_state: MdpState | None):
    n = link.n_elements
    agent_rng = stream(master_seed, "agent", arm)
    nets = None
    if arm != "random":
        nets = build_actor_critic(n, rms_amplitude(link), cfg, stream(master_seed, "init", arm),
                                  n_critics=2 if arm == "td3" else 1)
    buffer = ReplayBuffer(cfg.buffer_size, 4 * n, n)
    step = 0
    rows = []
    for ep in range(cfg.n_episodes):
        env_rng = stream(master_seed, "env", ep)
        state = frozen_state if frozen_state is not None else env_reset(link, cfg, env_rng)
        rewards = np.empty(cfg.steps_per_episode)
        for t in range(cfg.steps_per_episode):
            obs = state.vector()
            if nets is None:
                a = quantize_action(agent_rng.uniform(-math.pi, math.pi, n), cfg.bits)
            else:
                a = quantize_action(exploration_action(nets, obs, cfg, agent_rng), cfg.bits)
            nxt, r, _ = env_step(state, a, link, cfg, env_rng, advance_channel=frozen_state is None)
            rewards[t] = r
            if nets is not None:
                buffer.add(Transition(obs, a, r, nxt.vector()))
                batch = buffer.sample(agent_rng, cfg.batch_size)
                if arm == "td3":
                    critic_update_td3(batch, nets, cfg, agent_rng)
                    actor_update_td3(batch, nets, cfg, step)
                else:
                    update_ddpg(batch, nets, cfg)
            step += 1
            state = nxt
        rows.append((ep, arm, float(np.mean(rewards)), float(np.std(rewards))))
    return nets, rows


def train(link: UwocOrisLinkParams, cfg: AgentConfig, master_seed: int, arms=ARMS,
          frozen_state: MdpState | None = None) -> TrainResult:
    """Run every arm on the same per-episode channel streams.

    Episode ``e`` of every arm draws its channels from the stream keyed by
    ``(master_seed, "env", e)`` and the environment never consumes agent
    randomness, so all arms see identical channel sequences. With
    ``frozen_state`` every episode starts from that state and the channel
    never advances.
    """
    nets, log = {}, []
    for arm in arms:
        if arm not in ARMS:
            raise ValueError(f"unknown arm {arm!r}")
        nets[arm], rows = _run_arm(arm, link, cfg, master_seed, frozen_state)
        log.extend(rows)
    log.sort(key=lambda row: (row[0], ARMS.index(row[1])))
    return TrainResult(nets.get("td3"), nets.get("ddpg"), log)


def write_training_log(path, log):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for ep, arm, mean, std in log:
            w.writerow([ep, arm, repr(mean), repr(std)])


# ---------------------------------------------------------------------------
# Evaluation


def _policy_kernel(policy, link: UwocOrisLinkParams, cfg: AgentConfig, snr_grid, rng, n, chunk=10_000):
    # Channel draws come first so every policy sees the same channels.
    h_prev = sample_uwoc_cascade(link, rng, n).coefficients
    h_old = outdated_csi_step(h_prev, cfg.csi_correlation, rng, link.element_power())
    h = sample_uwoc_cascade(link, rng, n).coefficients
    gain = np.empty(n)
    for lo in range(0, n, chunk):
        sl = slice(lo, lo + chunk)
        theta = policy(observation(h[sl], h_old[sl]), rng)
        gain[sl] = combined_gain(h[sl], theta, link, cfg)
    snr = gain[:, None] * np.asarray(snr_grid, dtype=float)[None, :]
    return snr < link.outage_threshold_linear, snr


def as_policy(policy, bits: int):
    if isinstance(policy, ActorCritic):
        return FrozenPolicy.from_nets(policy, bits)
    if policy == "random":
        return RandomPolicy(bits)
    if callable(policy):
        return policy
    raise ValueError(f"unsupported policy {policy!r}")


def evaluate_policy(policy, link: UwocOrisLinkParams, cfg: AgentConfig, snr_grid, mc: McConfig,
                    tag: str = "policy_eval"):
    """OP, mean SNR and IM/DD capacity of a deterministic quantized policy per grid point.

    Policies evaluated with the same ``mc`` and ``tag`` share channel draws.
    """
    kernel = partial(_policy_kernel, as_policy(policy, cfg.bits), link, cfg, np.asarray(snr_grid, dtype=float))
    return simulate(kernel, mc, tag)


def policy_reward(policy, state: MdpState, link: UwocOrisLinkParams, cfg: AgentConfig) -> float:
    """Reward of holding the policy's action on a frozen state (no phase change)."""
    theta = policy(state.vector())
    frozen = MdpState(state.h, state.h_old, theta)
    return env_step(frozen, theta, link, cfg, None, advance_channel=False)[1]


# ---------------------------------------------------------------------------
# Checkpoints: one .npz holding arrays plus a JSON header under "header".


def _rng_state_to_json(state):
    if isinstance(state, dict):
        return {k: _rng_state_to_json(v) for k, v in state.items()}
    if isinstance(state, np.ndarray):
        return {"__array__": state.tolist(), "dtype": str(state.dtype)}
    return state


def _rng_state_from_json(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.array(obj["__array__"], dtype=obj["dtype"])
        return {k: _rng_state_from_json(v) for k, v in obj.items()}
    return obj


def _net_names(nets: ActorCritic):
    names = [("actor", nets.actor), ("actor_target", nets.actor_target)]
    names += [(f"critic{i}", c) for i, c in enumerate(nets.critics)]
    names += [(f"critic{i}_target", c) for i, c in enumerate(nets.critic_targets)]
    return names


def save_checkpoint(path, nets: ActorCritic, cfg: AgentConfig, rng: np.random.Generator | None = None):
    arrays = {"obs_scale": nets.obs_scale}
    layout = {}
    for name, p in _net_names(nets):
        layout[name] = p.activations
        for i, (w, b) in enumerate(zip(p.weights, p.biases)):
            arrays[f"{name}/w{i}"] = w
            arrays[f"{name}/b{i}"] = b
    opts = [("actor", nets.actor_opt)] + [(f"critic{i}", o) for i, o in enumerate(nets.critic_opts)]
    steps = {}
    for name, opt in opts:
        steps[name] = opt.t
        for i, (m, v) in enumerate(zip(opt.m, opt.v)):
            arrays[f"adam/{name}/m{i}"] = m
            arrays[f"adam/{name}/v{i}"] = v
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "agent_config": cfg.to_dict(),
        "layout": layout,
        "n_critics": len(nets.critics),
        "adam_steps": steps,
        "rng_state": None if rng is None else _rng_state_to_json(rng.bit_generator.state),
    }
    arrays["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path):
    """Returns (nets, agent_config, rng or None), bit-identical to what was saved."""
    with np.load(Path(path), allow_pickle=False) as z:
        data = {k: z[k] for k in z.files}
    header = json.loads(data.pop("header").tobytes().decode("utf-8"))
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not an actor-critic checkpoint")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    cfg = AgentConfig.from_dict(header["agent_config"])

    def net(name):
        acts = header["layout"][name]
        return MlpParams([data[f"{name}/w{i}"] for i in range(len(acts))],
                         [data[f"{name}/b{i}"] for i in range(len(acts))], list(acts))

    k = header["n_critics"]
    actor = net("actor")
    critics = [net(f"critic{i}") for i in range(k)]

    def opt(name, params, lr):
        o = Adam(params, lr)
        o.t = header["adam_steps"][name]
        o.m = [data[f"adam/{name}/m{i}"] for i in range(len(o.m))]
        o.v = [data[f"adam/{name}/v{i}"] for i in range(len(o.v))]
        return o

    nets = ActorCritic(
        obs_scale=data["obs_scale"],
        actor=actor,
        critics=critics,
        actor_target=net("actor_target"),
        critic_targets=[net(f"critic{i}_target") for i in range(k)],
        actor_opt=opt("actor", actor, cfg.actor_lr),
        critic_opts=[opt(f"critic{i}", c, cfg.critic_lr) for i, c in enumerate(critics)],
    )
    rng = None
    if header["rng_state"] is not None:
        state = _rng_state_from_json(header["rng_state"])
        rng = np.random.Generator(getattr(np.random, state["bit_generator"])())
        rng.bit_generator.state = state
    return nets, cfg, rng
