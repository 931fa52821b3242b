from .agent import action_probabilities, choose_action, policy_act
from .mdp import (
    Action,
    CompressionProblem,
    CompressionState,
    MdpError,
    RewardConfig,
    Status,
    heuristic_policy,
    mdp_step,
    run_episode,
)
from .network import PolicyParams, ppo_loss_and_grad
from .ppo import BanditEnv, PpoConfig, TrainingDiverged, TrainingResult, evaluate, ppo_train

__all__ = [
    "Action",
    "BanditEnv",
    "CompressionProblem",
    "CompressionState",
    "MdpError",
    "PolicyParams",
    "PpoConfig",
    "RewardConfig",
    "Status",
    "TrainingDiverged",
    "TrainingResult",
    "action_probabilities",
    "choose_action",
    "evaluate",
    "heuristic_policy",
    "mdp_step",
    "policy_act",
    "ppo_loss_and_grad",
    "ppo_train",
    "run_episode",
]
