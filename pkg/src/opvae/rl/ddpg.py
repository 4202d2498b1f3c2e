"""DDPG for discrete action sets via a straight-through Gumbel-softmax actor."""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass

import numpy as np

from .. import grad as G
from ..grad import Tensor
from .buffer import polyak_update


@dataclass
class DDPGConfig:
    n_envs: int = 8
    gamma: float = 0.99
    buffer_size: int = 100_000
    batch_size: int = 128
    rho: float = 0.01
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    max_grad_norm: float = 0.5
    hidden: tuple = (64, 64)
    temperature: float = 1.0
    eps_start: float = 0.3
    eps_end: float = 0.05
    eps_decay_episodes: int = 2000
    warmup: int = 1000
    updates_per_step: int = 1
    reward_scale: float = 1.0
    logit_reg: float = 1e-3
    z_mode: str = "sample"

    @classmethod
    def from_dict(cls, d: dict | None) -> "DDPGConfig":
        d = dict(d or {})
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in known})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        return out

    def epsilon(self, episodes: int) -> float:
        frac = min(1.0, episodes / max(1, self.eps_decay_episodes))
        return self.eps_start + frac * (self.eps_end - self.eps_start)


def gumbel_softmax(logits: Tensor, rng: np.random.Generator, temperature: float = 1.0, hard: bool = True) -> Tensor:
    """Relaxed categorical sample; ``hard`` returns a one-hot forward value with
    the soft sample's gradient (straight-through)."""
    g = -np.log(-np.log(rng.uniform(1e-12, 1.0, size=logits.shape)))
    soft = G.softmax((logits + g) * (1.0 / temperature))
    if not hard:
        return soft
    hard_vals = np.zeros_like(soft.data)
    hard_vals[np.arange(len(hard_vals)), np.argmax(soft.data, axis=-1)] = 1.0
    return soft + G.Tensor(hard_vals - soft.data)


class DDPGNetworks(G.Module):
    def __init__(self, state_dim: int, n_actions: int, hidden=(64, 64), rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.n_actions = n_actions
        self.actor = G.MLP([state_dim, *hidden, n_actions], rng)
        self.critic = G.MLP([state_dim + n_actions, *hidden, 1], rng)

    def q(self, state, action) -> Tensor:
        return G.reshape(self.critic(G.concat([G.as_tensor(state), G.as_tensor(action)], axis=-1)), (-1,))


class DDPG:
    """Online networks, delayed targets and one optimizer per network."""

    def __init__(self, state_dim: int, n_actions: int, cfg: DDPGConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.nets = DDPGNetworks(state_dim, n_actions, cfg.hidden, rng)
        self.targets = copy.deepcopy(self.nets)
        self.actor_opt = G.Adam(self.nets.actor.parameters(), lr=cfg.actor_lr, max_grad_norm=cfg.max_grad_norm)
        self.critic_opt = G.Adam(self.nets.critic.parameters(), lr=cfg.critic_lr, max_grad_norm=cfg.max_grad_norm)

    def critic_targets(self, reward, next_state, done) -> np.ndarray:
        """r + gamma * (1 - done) * Q'(s', mu'(s')) with mu' the greedy target action."""
        with G.no_grad():
            logits = self.targets.actor(next_state).data
            a = np.eye(self.nets.n_actions)[np.argmax(logits, axis=-1)]
            q_next = self.targets.q(next_state, a).data
        return reward + self.cfg.gamma * (1.0 - done) * q_next

    def update(self, batch: dict, rng: np.random.Generator) -> dict:
        cfg = self.cfg
        state = np.concatenate([batch["obs"], batch["z"]], axis=-1)
        next_state = np.concatenate([batch["next_obs"], batch["next_z"]], axis=-1)
        action = np.eye(self.nets.n_actions)[batch["action"]]
        y = self.critic_targets(batch["reward"] * cfg.reward_scale, next_state, batch["done"])

        self.critic_opt.zero_grad()
        resid = self.nets.q(state, action) - y
        critic_loss = (resid * resid).mean() * 0.5
        critic_loss.backward()
        self.critic_opt.step()

        self.actor_opt.zero_grad()
        logits = self.nets.actor(state)
        relaxed = gumbel_softmax(logits, rng, cfg.temperature, hard=True)
        actor_loss = -self.nets.q(state, relaxed).mean()
        if cfg.logit_reg:
            actor_loss = actor_loss + (logits * logits).mean() * cfg.logit_reg
        actor_loss.backward()
        # the critic is only a path for the actor gradient here
        self.nets.critic.zero_grad()
        self.actor_opt.step()

        polyak_update(self.targets, self.nets, cfg.rho)
        return {"critic_loss": critic_loss.item(), "actor_loss": actor_loss.item()}

    def state_dict(self) -> dict:
        out = {f"nets.{k}": v for k, v in self.nets.state_dict().items()}
        out.update({f"targets.{k}": v for k, v in self.targets.state_dict().items()})
        return out

    def load_state_dict(self, params: dict) -> None:
        self.nets.load_state_dict({k[5:]: v for k, v in params.items() if k.startswith("nets.")})
        self.targets.load_state_dict({k[8:]: v for k, v in params.items() if k.startswith("targets.")})
