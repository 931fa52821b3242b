"""
Train the compression policy with PPO and compare it to the fixed heuristic.

The environment hands the agent one document's hierarchical summary and a
random token budget; the agent prunes, summarizes or expands until it stops.
"""
import sys
import time

import numpy as np

from ctxforge.policy import PpoConfig, ppo_train
from ctxforge.policy.envs import CompressionEnv, heuristic_act, held_out_seeds, learned_act
from ctxforge.policy.ppo import evaluate


if __name__ == "__main__":
    episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
    env = CompressionEnv()
    t0 = time.perf_counter()
    result = ppo_train(env, PpoConfig(episodes=episodes))
    print(f"trained on {episodes} episodes in {time.perf_counter() - t0:.1f}s")
    curve = result.batch_mean_returns
    for i in range(0, len(curve), max(1, len(curve) // 8)):
        print(f"  batch {i:4d}: mean return {curve[i]:+.3f}")

    seeds = list(held_out_seeds(100))
    learned = np.mean(evaluate(env, learned_act(result.params), seeds))
    heuristic = np.mean(evaluate(env, heuristic_act, seeds))
    print(f"held-out mean return: learned {learned:.4f}, heuristic {heuristic:.4f}")
    result.params.save("policy.bin")
    print("wrote policy.bin (use with: ctxforge build corpus.jsonl --policy policy.bin --out cache.bin)")
