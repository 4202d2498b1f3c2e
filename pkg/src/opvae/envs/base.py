"""Shared pieces of the two-player partially observable Markov games.

Agent 0 is the controlled agent, agent 1 the (scripted) opponent. Reads of
opponent-side data from a ``JointStep`` go through counted accessors so that
the evaluation path can prove which information it consumed.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Invalid environment, opponent or pool definition."""


class ContractError(RuntimeError):
    """Call that violates an operation's preconditions."""


class UnsupportedError(NotImplementedError):
    pass


@dataclass
class AccessCounter:
    opponent_reads: int = 0

    def reset(self) -> None:
        self.opponent_reads = 0


class JointStep:
    """Result of ``reset``/``step``.

    ``agent_obs``, ``reward`` and ``done`` are the controlled agent's local
    information. Everything about the opponent is behind counted properties.
    """

    __slots__ = ("t", "done", "_obs", "_rewards", "_opp_action", "_counter")

    def __init__(self, t, observations, rewards, done, opponent_action, counter: AccessCounter):
        self.t = t
        self.done = done
        self._obs = observations
        self._rewards = rewards
        self._opp_action = opponent_action
        self._counter = counter

    @property
    def agent_obs(self) -> np.ndarray:
        return self._obs[0]

    @property
    def reward(self) -> float:
        return self._rewards[0]

    def _touch(self) -> None:
        self._counter.opponent_reads += 1

    @property
    def opponent_obs(self) -> np.ndarray:
        self._touch()
        return self._obs[1]

    @property
    def opponent_action(self) -> int | None:
        """Opponent's action for the step just taken (``None`` after reset)."""
        self._touch()
        return self._opp_action

    @property
    def opponent_reward(self) -> float:
        self._touch()
        return self._rewards[1]

    @property
    def observations(self) -> tuple[np.ndarray, np.ndarray]:
        self._touch()
        return self._obs

    @property
    def rewards(self) -> tuple[float, float]:
        self._touch()
        return self._rewards


class ScriptedOpponent:
    """Fixed opponent policy. ``act`` must depend only on (observation, internal state)."""

    id: str = "opponent"
    env_kind: str = ""
    n_actions: int = 2

    def reset(self) -> None:
        pass

    def act(self, obs: np.ndarray) -> int:
        raise NotImplementedError

    def update(self, own_action: int, other_action: int) -> None:
        """Advance internal state after a joint step."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.id!r})"


@dataclass
class OpponentPool:
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)

    def __post_init__(self):
        train_ids = [o.id for o in self.train]
        test_ids = [o.id for o in self.test]
        if len(set(train_ids)) != len(train_ids) or len(set(test_ids)) != len(test_ids):
            raise ConfigurationError("duplicate opponent ids inside a pool split")
        overlap = set(train_ids) & set(test_ids)
        if overlap:
            raise ConfigurationError(f"train and test pools overlap: {sorted(overlap)}")
        if not self.train:
            raise ConfigurationError("training pool is empty")

    def split(self, name: str) -> list:
        if name == "train":
            return self.train
        if name == "test":
            return self.test
        raise ConfigurationError(f"unknown pool split {name!r}")

    def ids(self, name: str) -> list[str]:
        return [o.id for o in self.split(name)]

    def sample(self, rng: np.random.Generator, name: str = "train"):
        members = self.split(name)
        if not members:
            raise ConfigurationError(f"pool split {name!r} is empty")
        return members[int(rng.integers(len(members)))]

    def by_id(self, opp_id: str):
        for o in self.train + self.test:
            if o.id == opp_id:
                return o
        raise KeyError(opp_id)


class MarkovGame:
    """Fixed-horizon two-player game. Subclasses fill in ``_reset`` and ``_transition``."""

    kind = ""
    horizon = 25
    n_actions = 2
    opp_n_actions = 2
    obs_dim = 0
    opp_obs_dim = 0

    def __init__(self):
        self.counter = AccessCounter()
        self.rng = np.random.default_rng()
        self.opponent: ScriptedOpponent | None = None
        self.t = 0
        self.done = True

    def check_opponent(self, opponent: ScriptedOpponent) -> None:
        if getattr(opponent, "env_kind", None) != self.kind:
            raise ConfigurationError(f"{opponent!r} is not compatible with {self.kind} environments")

    def reset(self, opponent: ScriptedOpponent, seed=None) -> JointStep:
        self.check_opponent(opponent)
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        # private copy: scripted opponents carry per-episode state
        self.opponent = copy.deepcopy(opponent)
        self.opponent.reset()
        self.t = 0
        self.done = False
        obs = self._reset()
        return JointStep(0, obs, (0.0, 0.0), False, None, self.counter)

    def step(self, action: int) -> JointStep:
        if self.done:
            raise ContractError("step() called on a finished episode; call reset() first")
        action = int(action)
        if not 0 <= action < self.n_actions:
            raise ContractError(f"action {action} outside [0, {self.n_actions})")
        obs, rewards, opp_action = self._transition(action)
        self.t += 1
        self.done = self.t >= self.horizon
        return JointStep(self.t, obs, rewards, self.done, opp_action, self.counter)

    def _reset(self):
        raise NotImplementedError

    def _transition(self, action: int):
        raise NotImplementedError


def one_hot(index: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[index] = 1.0
    return v
