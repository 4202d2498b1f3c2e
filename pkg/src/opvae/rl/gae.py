from __future__ import annotations

import numpy as np

from ..envs.base import ContractError


def gae_advantages(rewards, values, bootstrap_value, gamma: float = 0.99, lam: float = 0.95, dones=None):
    """Generalized advantage estimates and value targets.

    Works on (T,) or (T, N) arrays. ``dones[t]`` marks that the transition at
    t ended the episode, which cuts both the bootstrap and the trace.
    Returns ``(advantages, returns)`` with ``returns = advantages + values``.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.shape != values.shape:
        raise ContractError(f"rewards {rewards.shape} and values {values.shape} differ")
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ContractError("gamma and lambda must lie in [0, 1]")
    bootstrap = np.broadcast_to(np.asarray(bootstrap_value, dtype=float), rewards.shape[1:])
    not_done = np.ones_like(rewards) if dones is None else 1.0 - np.asarray(dones, dtype=float)
    if not_done.shape != rewards.shape:
        raise ContractError("dones must match rewards")
    T = len(rewards)
    adv = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:])
    next_value = bootstrap
    for t in reversed(range(T)):
        delta = rewards[t] + gamma * next_value * not_done[t] - values[t]
        running = delta + gamma * lam * not_done[t] * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values
