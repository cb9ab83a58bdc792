"""Learning-based O-RIS phase control: environment, networks, agents, training."""

from .agents import ActorCritic, ReplayBuffer, Transition, actor_update_td3, critic_update_td3, update_ddpg
from .env import (
    Action,
    AgentConfig,
    ContractViolation,
    MdpState,
    amplitude_of_phase,
    env_reset,
    env_step,
    fbl_error_probability,
    outdated_csi_step,
    quantize_action,
    reward,
)
from .mlp import Adam, MlpParams, StaleCacheError, init_mlp, mlp_backward, mlp_forward
from .training import evaluate_policy, load_checkpoint, save_checkpoint, train
