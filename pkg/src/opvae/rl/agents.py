"""Acting agents and the greedy evaluation protocol.

All agents act on a batch of environments in lockstep through the same three
calls: ``reset(steps)``, ``act(rng, greedy)`` and ``observe(actions, steps)``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .. import grad as G
from ..envs.base import ConfigurationError, JointStep
from ..vae.model import OpponentModel, build_local_step
from .a2c import ActorCritic, sample_actions


def _latent(post: G.DiagGaussianParams, z_mode: str, rng: np.random.Generator, noise=None):
    if z_mode == "mean":
        return post.mean, None
    if noise is None:
        noise = rng.standard_normal(post.mean.shape)
    return G.reparam_sample(post, noise), noise


class SMA2CAgent:
    """Self-conditioned encoder feeding an actor-critic. Reads only local information."""

    def __init__(self, model: OpponentModel, ac: ActorCritic, z_mode: str = "sample"):
        self.model = model
        self.ac = ac
        self.z_mode = z_mode

    def parameters(self) -> list:
        return self.model.parameters() + self.ac.parameters()

    def reset(self, steps: list[JointStep]) -> None:
        self.h = self.model.encoder.initial_state(len(steps))
        self.post = self.model.encoder.posterior(self.h)
        self.obs = np.stack([s.agent_obs for s in steps])

    def policy_input(self, rng, noise=None):
        z, noise = _latent(self.post, self.z_mode, rng, noise)
        return G.concat([G.as_tensor(self.obs), z], axis=-1), z, noise

    def forward(self, rng):
        """Logits and values for the current step, with the graph attached."""
        x, z, noise = self.policy_input(rng)
        logits, values = self.ac(x)
        return logits, values, z

    def act(self, rng, greedy: bool = False) -> np.ndarray:
        with G.no_grad():
            x, _, _ = self.policy_input(rng)
            logits = self.ac.actor(x).data
        return np.argmax(logits, axis=-1) if greedy else sample_actions(logits, rng)

    def observe(self, actions, steps: list[JointStep]) -> None:
        rewards = np.array([s.reward for s in steps])
        dones = np.array([s.done for s in steps], dtype=float)
        x = build_local_step(self.obs, actions, rewards, dones, self.model.n_actions, self.model.inputs)
        self.h, self.post = self.model.encoder.step(x, self.h)
        self.obs = np.stack([s.agent_obs for s in steps])


class OMDDPGAgent:
    """Opponent-conditioned encoder (frozen) feeding a deterministic actor.

    The encoder consumes the opponent's observation/action stream, so acting
    reads opponent-side data at every step.
    """

    def __init__(self, model: OpponentModel, actor: G.MLP, z_mode: str = "sample"):
        self.model = model
        self.actor = actor
        self.z_mode = z_mode
        self.epsilon = 0.0

    def reset(self, steps: list[JointStep]) -> None:
        with G.no_grad():
            self.h = self.model.encoder.initial_state(len(steps))
            self.post = self.model.encoder.posterior(self.h)
        self.obs = np.stack([s.agent_obs for s in steps])
        self.opp_obs = np.stack([s.opponent_obs for s in steps])

    def current_z(self, rng) -> np.ndarray:
        with G.no_grad():
            z, _ = _latent(self.post, self.z_mode, rng)
        return z.data.copy()

    def act(self, rng, greedy: bool = False, z: np.ndarray | None = None) -> np.ndarray:
        z = self.current_z(rng) if z is None else z
        with G.no_grad():
            logits = self.actor(np.concatenate([self.obs, z], axis=-1)).data
        if greedy:
            return np.argmax(logits, axis=-1)
        gumbel = -np.log(-np.log(rng.uniform(1e-12, 1.0, size=logits.shape)))
        actions = np.argmax(logits + gumbel, axis=-1)
        explore = rng.random(len(actions)) < self.epsilon
        actions[explore] = rng.integers(logits.shape[-1], size=int(explore.sum()))
        return actions

    def observe(self, actions, steps: list[JointStep]) -> None:
        opp_actions = np.array([s.opponent_action for s in steps], dtype=int)
        onehot = np.eye(self.model.opp_n_actions)[opp_actions]
        with G.no_grad():
            self.h, self.post = self.model.encoder.step(np.concatenate([self.opp_obs, onehot], axis=-1), self.h)
        self.obs = np.stack([s.agent_obs for s in steps])
        self.opp_obs = np.stack([s.opponent_obs for s in steps])


class RandomAgent:
    def __init__(self, n_actions: int):
        self.n_actions = n_actions

    def reset(self, steps) -> None:
        self.batch = len(steps)

    def act(self, rng, greedy: bool = False) -> np.ndarray:
        return rng.integers(self.n_actions, size=self.batch)

    def observe(self, actions, steps) -> None:
        pass


class ScriptedAgent:
    """Wraps a per-environment callable ``fn(env, step) -> action`` (e.g. an oracle)."""

    def __init__(self, fn, envs):
        self.fn = fn
        self.envs = envs

    def reset(self, steps) -> None:
        self.steps = steps

    def act(self, rng, greedy: bool = False) -> np.ndarray:
        return np.array([self.fn(env, s) for env, s in zip(self.envs, self.steps)])

    def observe(self, actions, steps) -> None:
        self.steps = steps


def run_lockstep(agent, envs, opponents, rng: np.random.Generator, greedy: bool = False, seeds=None) -> np.ndarray:
    """Play one episode in each env against the matching opponent; returns episode returns."""
    seeds = [int(s) for s in rng.integers(2**31, size=len(envs))] if seeds is None else seeds
    steps = [env.reset(opp, seed=s) for env, opp, s in zip(envs, opponents, seeds)]
    agent.reset(steps)
    returns = np.zeros(len(envs))
    done = False
    while not done:
        actions = agent.act(rng, greedy=greedy)
        steps = [env.step(a) for env, a in zip(envs, actions)]
        returns += [s.reward for s in steps]
        agent.observe(actions, steps)
        done = steps[0].done
    return returns


@dataclass
class EvalResult:
    pool: str
    mean_return: float
    per_opponent: dict = field(default_factory=dict)
    returns: list = field(default_factory=list)
    n_episodes: int = 0
    opponent_reads: int = 0
    hygiene_violations: int = 0
    opponent_ids: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pool": self.pool, "mean_return": self.mean_return, "per_opponent": self.per_opponent,
            "n_episodes": self.n_episodes, "opponent_reads": self.opponent_reads,
            "hygiene_violations": self.hygiene_violations,
        }


def evaluate_policy(agent, envs, pool, split: str, n_episodes: int, rng: np.random.Generator, greedy: bool = True) -> EvalResult:
    """Greedy evaluation against one pool split, cycling through its opponents.

    No parameters change here. Every sampled opponent is audited against the
    requested split; ``opponent_reads`` counts opponent-side reads made by the
    agent during the episodes.
    """
    members = pool.split(split)
    if not members:
        raise ConfigurationError(f"pool split {split!r} is empty")
    allowed = set(pool.ids(split))
    other = set(pool.ids("test" if split == "train" else "train"))
    schedule = [members[i % len(members)] for i in range(n_episodes)]
    for env in envs:
        env.counter.reset()
    per_opp = defaultdict(list)
    all_returns: list[float] = []
    violations = 0
    ids_seen = []
    for start in range(0, n_episodes, len(envs)):
        opps = schedule[start : start + len(envs)]
        batch_envs = envs[: len(opps)]
        for o in opps:
            ids_seen.append(o.id)
            if o.id not in allowed or o.id in other:
                violations += 1
        rets = run_lockstep(agent, batch_envs, opps, rng, greedy=greedy)
        for o, r in zip(opps, rets):
            per_opp[o.id].append(float(r))
            all_returns.append(float(r))
    reads = sum(env.counter.opponent_reads for env in envs)
    return EvalResult(
        pool=split,
        mean_return=float(np.mean(all_returns)),
        per_opponent={k: float(np.mean(v)) for k, v in per_opp.items()},
        returns=all_returns,
        n_episodes=n_episodes,
        opponent_reads=reads,
        hygiene_violations=violations,
        opponent_ids=ids_seen,
    )
