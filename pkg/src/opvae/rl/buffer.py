"""Experience replay and target-network tracking."""
from __future__ import annotations

import numpy as np

from .. import grad as G
from ..envs.base import ContractError

FIELDS = ("obs", "z", "action", "reward", "next_obs", "next_z", "done")


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, z_dim: int, n_actions: int):
        self.capacity = int(capacity)
        self.n_actions = n_actions
        self.obs = np.zeros((capacity, obs_dim))
        self.z = np.zeros((capacity, z_dim))
        self.action = np.zeros(capacity, dtype=int)
        self.reward = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.next_z = np.zeros((capacity, z_dim))
        self.done = np.zeros(capacity)
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, z, action, reward, next_obs, next_z, done) -> None:
        """Append one transition, or a batch when ``action`` is an array."""
        action = np.atleast_1d(np.asarray(action, dtype=int))
        n = len(action)
        rows = (self.pos + np.arange(n)) % self.capacity
        self.obs[rows] = np.reshape(obs, (n, -1))
        self.z[rows] = np.reshape(z, (n, -1))
        self.action[rows] = action
        self.reward[rows] = np.reshape(reward, n)
        self.next_obs[rows] = np.reshape(next_obs, (n, -1))
        self.next_z[rows] = np.reshape(next_z, (n, -1))
        self.done[rows] = np.reshape(done, n)
        self.pos = (self.pos + n) % self.capacity
        self.size = min(self.size + n, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size < batch_size:
            raise ContractError(f"buffer holds {self.size} transitions, batch needs {batch_size}")
        return rng.integers(self.size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        idx = self.sample_indices(batch_size, rng)
        return {f: getattr(self, f)[idx] for f in FIELDS}

    def state_dict(self) -> dict:
        return {"size": self.size, "pos": self.pos, **{f: getattr(self, f)[: self.size].copy() for f in FIELDS}}

    def load_state_dict(self, state: dict) -> None:
        self.size, self.pos = int(state["size"]), int(state["pos"])
        for f in FIELDS:
            getattr(self, f)[: self.size] = state[f]


def hard_update(target: G.Module, source: G.Module) -> None:
    for t, s in zip(target.parameters(), source.parameters()):
        t.data = s.data.copy()


def polyak_update(target: G.Module, source: G.Module, rho: float) -> None:
    """target <- (1 - rho) * target + rho * source."""
    for t, s in zip(target.parameters(), source.parameters()):
        t.data *= 1.0 - rho
        t.data += rho * s.data
