"""Desk-scale speaker-listener: the controlled agent is the listener.

Each color has one landmark on a ``grid_size`` x ``grid_size`` board. A goal
color is drawn per episode, the speaker utters ``perm[goal]`` every step and
the listener has to work out which landmark the symbol refers to. Different
speakers use different color-to-symbol permutations.
"""
from __future__ import annotations

import itertools

import numpy as np

from .base import ConfigurationError, MarkovGame, OpponentPool, ScriptedOpponent, one_hot

# stay, up, down, left, right
MOVES = np.array([[0, 0], [0, 1], [0, -1], [-1, 0], [1, 0]])


class Speaker(ScriptedOpponent):
    env_kind = "speaker_listener"

    def __init__(self, perm):
        perm = tuple(int(p) for p in perm)
        if sorted(perm) != list(range(len(perm))):
            raise ConfigurationError(f"speaker permutation {perm} is not a bijection")
        self.perm = perm
        self.n_actions = len(perm)
        self.id = "sl/perm_" + "".join(str(p) for p in perm)

    def act(self, obs) -> int:
        return self.perm[int(np.argmax(obs))]


class SpeakerListener(MarkovGame):
    kind = "speaker_listener"

    def __init__(self, n_colors: int = 4, grid_size: int = 5, horizon: int = 25):
        super().__init__()
        if n_colors < 2 or grid_size < 2 or n_colors > grid_size * grid_size:
            raise ConfigurationError("need 2 <= n_colors <= grid_size^2 and grid_size >= 2")
        self.n_colors = n_colors
        self.grid_size = grid_size
        self.horizon = int(horizon)
        self.n_actions = len(MOVES)
        self.opp_n_actions = n_colors
        self.obs_dim = 2 + 2 * n_colors + n_colors
        self.opp_obs_dim = n_colors
        self.normalizer = (grid_size - 1) * np.sqrt(2.0)
        self.pos = np.zeros(2, dtype=int)
        self.landmarks = np.zeros((n_colors, 2), dtype=int)
        self.goal = 0
        self.symbol = 0

    def check_opponent(self, opponent):
        super().check_opponent(opponent)
        if len(opponent.perm) != self.n_colors:
            raise ConfigurationError(f"{opponent!r} speaks {len(opponent.perm)} symbols, env has {self.n_colors} colors")

    def _scale(self, p) -> np.ndarray:
        return 2.0 * np.asarray(p, dtype=float) / (self.grid_size - 1) - 1.0

    def distance(self) -> float:
        return float(np.linalg.norm(self.pos - self.landmarks[self.goal]))

    def _observe(self):
        o_agent = np.concatenate(
            [self._scale(self.pos), self._scale(self.landmarks).reshape(-1), one_hot(self.symbol, self.n_colors)]
        )
        return o_agent, one_hot(self.goal, self.n_colors)

    def _reset(self):
        cells = self.rng.choice(self.grid_size * self.grid_size, size=self.n_colors, replace=False)
        self.landmarks = np.stack([cells // self.grid_size, cells % self.grid_size], axis=1)
        self.goal = int(self.rng.integers(self.n_colors))
        self.pos = self.rng.integers(self.grid_size, size=2)
        self.symbol = int(self.opponent.act(one_hot(self.goal, self.n_colors)))
        return self._observe()

    def _transition(self, action):
        uttered = self.symbol
        self.pos = np.clip(self.pos + MOVES[action], 0, self.grid_size - 1)
        r = -self.distance() / self.normalizer
        self.symbol = int(self.opponent.act(one_hot(self.goal, self.n_colors)))
        return self._observe(), (r, r), uttered

    def oracle_action(self) -> int:
        """Greedy shortest-path move toward the true goal (uses privileged state)."""
        delta = self.landmarks[self.goal] - self.pos
        if not delta.any():
            return 0
        if abs(delta[0]) >= abs(delta[1]):
            return 4 if delta[0] > 0 else 3
        return 1 if delta[1] > 0 else 2


def speaker_pool(n_colors: int = 4, n_train: int = 5, n_test: int = 5, seed: int = 0) -> OpponentPool:
    """Draw ``n_train + n_test`` distinct permutations and split them."""
    perms = list(itertools.permutations(range(n_colors)))
    need = n_train + n_test
    if need > len(perms):
        raise ConfigurationError(f"only {len(perms)} permutations of {n_colors} colors, need {need}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(perms), size=need, replace=False)
    speakers = [Speaker(perms[i]) for i in chosen]
    return OpponentPool(train=speakers[:n_train], test=speakers[n_train:])
