"""Repeated 2x2 matrix games (prisoner's dilemma) with finite-state opponents."""
from __future__ import annotations

import numpy as np

from .base import ConfigurationError, MarkovGame, ScriptedOpponent, UnsupportedError, one_hot

COOPERATE, DEFECT, NONE = 0, 1, 2

# Axelrod values: temptation 5, reward 3, punishment 1, sucker 0
AXELROD = {"T": 5.0, "R": 3.0, "P": 1.0, "S": 0.0}


def prisoners_dilemma_payoff(T: float = 5.0, R: float = 3.0, P: float = 1.0, S: float = 0.0) -> np.ndarray:
    """payoff[a1][a2] = (r1, r2) with 0 = cooperate, 1 = defect."""
    return np.array(
        [
            [[R, R], [S, T]],
            [[T, S], [P, P]],
        ],
        dtype=float,
    )


class FiniteStateOpponent(ScriptedOpponent):
    """Opponent whose behaviour is a finite automaton driven by the other player's moves."""

    env_kind = "matrix"
    n_actions = 2
    initial = 0

    def __init__(self):
        self.state = self.initial

    def states(self) -> list:
        raise NotImplementedError

    def policy(self, state) -> int:
        raise NotImplementedError

    def next_state(self, state, other_action: int):
        raise NotImplementedError

    def reset(self) -> None:
        self.state = self.initial

    def act(self, obs) -> int:
        return self.policy(self.state)

    def update(self, own_action: int, other_action: int) -> None:
        self.state = self.next_state(self.state, other_action)


class AlwaysDefect(FiniteStateOpponent):
    id = "pd/always_defect"

    def states(self):
        return [0]

    def policy(self, state):
        return DEFECT

    def next_state(self, state, other_action):
        return 0


class AlwaysCooperate(FiniteStateOpponent):
    id = "pd/always_cooperate"

    def states(self):
        return [0]

    def policy(self, state):
        return COOPERATE

    def next_state(self, state, other_action):
        return 0


class TitForTat(FiniteStateOpponent):
    """Opens with cooperation, then repeats the other player's previous move.

    The state is the other player's last action.
    """

    id = "pd/tit_for_tat"
    initial = COOPERATE

    def states(self):
        return [COOPERATE, DEFECT]

    def policy(self, state):
        return state

    def next_state(self, state, other_action):
        return other_action


class GrimTrigger(FiniteStateOpponent):
    """Cooperates until the other player defects once, then defects forever."""

    id = "pd/grim_trigger"
    initial = 0

    def states(self):
        return [0, 1]

    def policy(self, state):
        return COOPERATE if state == 0 else DEFECT

    def next_state(self, state, other_action):
        return 1 if state == 1 or other_action == DEFECT else 0


PD_OPPONENTS = {cls.id: cls for cls in (AlwaysDefect, AlwaysCooperate, TitForTat, GrimTrigger)}


class RepeatedMatrixGame(MarkovGame):
    """Observation of each player: [one-hot own previous action (C, D, none),
    one-hot other previous action (C, D, none), t / H]."""

    kind = "matrix"
    n_actions = 2
    opp_n_actions = 2
    obs_dim = 7
    opp_obs_dim = 7

    def __init__(self, payoff=None, horizon: int = 25):
        super().__init__()
        payoff = prisoners_dilemma_payoff() if payoff is None else np.asarray(payoff, dtype=float)
        if payoff.shape != (2, 2, 2) or not np.all(np.isfinite(payoff)):
            raise ConfigurationError("payoff must be a finite 2x2x2 array")
        self.payoff = payoff
        self.horizon = int(horizon)
        self.last = (NONE, NONE)

    def _observe(self, t=None):
        a, b = self.last
        tf = (self.t if t is None else t) / self.horizon
        o_agent = np.concatenate([one_hot(a, 3), one_hot(b, 3), [tf]])
        o_opp = np.concatenate([one_hot(b, 3), one_hot(a, 3), [tf]])
        return o_agent, o_opp

    def _reset(self):
        self.last = (NONE, NONE)
        return self._observe()

    def current_obs(self):
        return self._observe()

    def _transition(self, action):
        _, o_opp = self._observe()
        opp_action = int(self.opponent.act(o_opp))
        r1, r2 = self.payoff[action][opp_action]
        self.opponent.update(opp_action, action)
        self.last = (action, opp_action)
        return self._observe(self.t + 1), (float(r1), float(r2)), opp_action


def optimal_return_oracle(env: RepeatedMatrixGame, opponent, horizon: int | None = None, gamma: float = 1.0) -> float:
    """Exact best episodic return against a finite-state opponent, by backward induction
    over (timestep, opponent state)."""
    if not isinstance(opponent, FiniteStateOpponent):
        raise UnsupportedError(f"{opponent!r} has no declared finite state space")
    H = env.horizon if horizon is None else int(horizon)
    states = opponent.states()
    value = {s: 0.0 for s in states}
    for _ in range(H):
        new = {}
        for s in states:
            b = opponent.policy(s)
            new[s] = max(
                env.payoff[a][b][0] + gamma * value[opponent.next_state(s, a)] for a in (COOPERATE, DEFECT)
            )
        value = new
    return float(value[opponent.initial])
