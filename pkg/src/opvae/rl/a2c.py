"""Synchronous advantage actor-critic pieces."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import grad as G
from ..grad import Tensor


@dataclass
class A2CConfig:
    n_envs: int = 8
    gamma: float = 0.99
    gae_lambda: float = 0.95
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    lr: float = 3e-4
    max_grad_norm: float = 0.5
    hidden: tuple = (64, 64)
    reward_scale: float = 1.0
    c_vae: float = 1.0
    beta: float = 0.01
    latent: int = 8
    enc_hidden: int = 64
    dec_hidden: tuple = (64, 64)
    inputs: str = "full"
    z_mode: str = "sample"

    @classmethod
    def from_dict(cls, d: dict | None) -> "A2CConfig":
        d = dict(d or {})
        for key in ("hidden", "dec_hidden"):
            if key in d:
                d[key] = tuple(d[key])
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in known})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden"], out["dec_hidden"] = list(self.hidden), list(self.dec_hidden)
        return out


class ActorCritic(G.Module):
    """Separate policy and value MLPs over the augmented observation [o; z]."""

    def __init__(self, in_dim: int, n_actions: int, hidden=(64, 64), rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.n_actions = n_actions
        self.actor = G.MLP([in_dim, *hidden, n_actions], rng)
        self.critic = G.MLP([in_dim, *hidden, 1], rng)

    def __call__(self, x) -> tuple[Tensor, Tensor]:
        x = G.as_tensor(x)
        return self.actor(x), G.reshape(self.critic(x), (-1,))


def entropy(logits: Tensor) -> Tensor:
    logp = G.log_softmax(logits)
    return -(G.exp(logp) * logp).sum(axis=-1)


def a2c_loss(
    logits: Tensor,
    actions: np.ndarray,
    advantages: np.ndarray,
    values: Tensor,
    returns: np.ndarray,
    ent_coef: float = 0.01,
    vf_coef: float = 0.5,
) -> tuple[Tensor, dict]:
    """mean(-A log pi(a)) + vf_coef * mean((R - V)^2) - ent_coef * mean(H(pi)).

    ``advantages`` and ``returns`` are plain arrays, so no gradient reaches the
    critic through the actor term.
    """
    actions = np.asarray(actions, dtype=int).reshape(-1)
    n = len(actions)
    onehot = np.zeros((n, logits.shape[-1]))
    onehot[np.arange(n), actions] = 1.0
    logp = G.log_softmax(logits)
    logp_a = (logp * onehot).sum(axis=-1)
    adv = np.asarray(advantages, dtype=float).reshape(-1)
    ret = np.asarray(returns, dtype=float).reshape(-1)
    policy_loss = -(logp_a * adv).mean()
    resid = G.as_tensor(ret) - values
    value_loss = (resid * resid).mean()
    ent = (-(G.exp(logp) * logp).sum(axis=-1)).mean()
    loss = policy_loss + value_loss * vf_coef - ent * ent_coef
    return loss, {
        "policy_loss": policy_loss.item(),
        "value_loss": value_loss.item(),
        "entropy": ent.item(),
    }


def sample_actions(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    logits = logits - logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=-1, keepdims=True)
    u = rng.random((len(p), 1))
    return np.minimum((p.cumsum(axis=-1) < u).sum(axis=-1), p.shape[-1] - 1)
