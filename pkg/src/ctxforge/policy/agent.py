from __future__ import annotations

import numpy as np

from .mdp import Action, CompressionProblem, CompressionState, MdpError
from .network import PolicyParams


def action_probabilities(params: PolicyParams, features: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(features)):
        raise MdpError("non-finite state features")
    probs, _ = params.forward(features[None, :])
    return probs[0]


def choose_action(
    params: PolicyParams,
    features: np.ndarray,
    deterministic: bool,
    rng: np.random.Generator | int | None = None,
) -> Action:
    probs = action_probabilities(params, features)
    if deterministic:
        return Action(int(np.argmax(probs)))  # argmax returns the lowest index on ties
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return Action(int(rng.choice(len(probs), p=probs)))


def policy_act(
    params: PolicyParams,
    state: CompressionState,
    problem: CompressionProblem,
    deterministic: bool = True,
    rng: np.random.Generator | int | None = None,
) -> Action:
    return choose_action(params, problem.features(state), deterministic, rng)
