"""Recurrent Gaussian encoders and the feed-forward opponent-action decoder."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import grad as G
from ..envs.base import ContractError
from ..envs.trajectory import LocalTrajectory, OpponentTrajectory
from ..grad import DiagGaussianParams, Tensor

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0

# which parts of (o, one-hot a, r, d) the self-conditioned encoder sees
INPUT_MASKS = {
    "full": (True, True, True, True),
    "obs_action": (True, True, False, False),
    "obs_only": (True, False, False, False),
}


@dataclass
class PosteriorSequence:
    """Per-timestep posteriors q(z_t | prefix up to t), each batched as (B, Z).

    ``initial`` is the posterior before any step has been consumed; the policy
    acting at step t uses ``shifted()[t]`` so it never sees step t itself.
    """

    posteriors: list[DiagGaussianParams]
    initial: DiagGaussianParams

    def __len__(self) -> int:
        return len(self.posteriors)

    def __getitem__(self, t: int) -> DiagGaussianParams:
        return self.posteriors[t]

    @property
    def latent_size(self) -> int:
        return self.initial.mean.shape[-1]

    def means(self) -> np.ndarray:
        return np.stack([p.mean.data for p in self.posteriors])

    def log_stds(self) -> np.ndarray:
        return np.stack([p.log_std.data for p in self.posteriors])

    def shifted(self) -> list[DiagGaussianParams]:
        return [self.initial] + self.posteriors[:-1]


class RecurrentEncoder(G.Module):
    def __init__(self, input_dim: int, latent: int = 8, hidden: int = 64, rng=None, zero: bool = False):
        rng = np.random.default_rng(0) if rng is None else rng
        self.input_dim, self.latent, self.hidden = input_dim, latent, hidden
        self.cell = G.GRUCell(input_dim, hidden, rng, zero=zero)
        self.head = G.Dense(hidden, 2 * latent, rng, zero=zero)

    def posterior(self, h: Tensor) -> DiagGaussianParams:
        out = self.head(h)
        Z = self.latent
        return DiagGaussianParams(out[:, :Z], G.clip(out[:, Z:], LOG_STD_MIN, LOG_STD_MAX))

    def initial_state(self, batch: int) -> Tensor:
        return self.cell.initial_state(batch)

    def step(self, x, h: Tensor) -> tuple[Tensor, DiagGaussianParams]:
        h = self.cell(G.as_tensor(x), h)
        return h, self.posterior(h)

    def __call__(self, inputs: np.ndarray) -> PosteriorSequence:
        """``inputs`` has shape (H, B, input_dim)."""
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim != 3 or inputs.shape[0] == 0:
            raise ContractError("encoder needs a non-empty (H, B, input_dim) array")
        if inputs.shape[2] != self.input_dim:
            raise ContractError(f"encoder expects {self.input_dim} input features, got {inputs.shape[2]}")
        h = self.initial_state(inputs.shape[1])
        initial = self.posterior(h)
        posts = []
        for x in inputs:
            h, post = self.step(x, h)
            posts.append(post)
        return PosteriorSequence(posts, initial)


class OpponentDecoder(G.Module):
    """p(a_opp | o_opp, z): logits over the opponent's actions."""

    def __init__(self, opp_obs_dim: int, latent: int, n_actions: int, hidden: Sequence[int] = (64, 64), rng=None, zero_last=False):
        rng = np.random.default_rng(0) if rng is None else rng
        self.n_actions = n_actions
        self.net = G.MLP([opp_obs_dim + latent, *hidden, n_actions], rng, activation="tanh", zero_last=zero_last)

    def __call__(self, opp_obs, z: Tensor) -> Tensor:
        return self.net(G.concat([G.as_tensor(opp_obs), z], axis=-1))


class OpponentModel(G.Module):
    """Encoder plus decoder. ``kind`` is ``"opponent"`` (conditions on the opponent
    trajectory) or ``"self"`` (conditions on the agent's local trajectory)."""

    def __init__(self, kind: str, obs_dim: int, n_actions: int, opp_obs_dim: int, opp_n_actions: int,
                 latent: int = 8, enc_hidden: int = 64, dec_hidden: Sequence[int] = (64, 64),
                 inputs: str = "full", rng=None):
        if kind not in ("opponent", "self"):
            raise ValueError(f"unknown model kind {kind!r}")
        if inputs not in INPUT_MASKS:
            raise ValueError(f"unknown encoder input set {inputs!r}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.kind = kind
        self.inputs = inputs
        self.obs_dim, self.n_actions = obs_dim, n_actions
        self.opp_obs_dim, self.opp_n_actions = opp_obs_dim, opp_n_actions
        in_dim = opp_obs_dim + opp_n_actions if kind == "opponent" else obs_dim + n_actions + 2
        self.encoder = RecurrentEncoder(in_dim, latent, enc_hidden, rng)
        self.decoder = OpponentDecoder(opp_obs_dim, latent, opp_n_actions, dec_hidden, rng)

    @property
    def latent(self) -> int:
        return self.encoder.latent

    def config(self) -> dict:
        return {
            "kind": self.kind, "obs_dim": self.obs_dim, "n_actions": self.n_actions,
            "opp_obs_dim": self.opp_obs_dim, "opp_n_actions": self.opp_n_actions,
            "latent": self.encoder.latent, "enc_hidden": self.encoder.hidden,
            "dec_hidden": [l.n_out for l in self.decoder.net.layers[:-1]], "inputs": self.inputs,
        }

    @classmethod
    def from_config(cls, cfg: dict, rng=None) -> "OpponentModel":
        cfg = dict(cfg)
        cfg["dec_hidden"] = tuple(cfg.get("dec_hidden", (64, 64)))
        return cls(rng=rng, **cfg)

    def encode_inputs(self, trajs) -> np.ndarray:
        if self.kind == "opponent":
            return opponent_inputs(trajs, self.opp_n_actions)
        return local_inputs(trajs, self.n_actions, self.inputs)


def _one_hot_seq(actions: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(actions.shape + (n,))
    np.put_along_axis(out, actions[..., None], 1.0, axis=-1)
    return out


def opponent_inputs(trajs: Sequence[OpponentTrajectory], n_actions: int) -> np.ndarray:
    """(H, B, opp_obs_dim + n_actions) array of [o_opp; one-hot a_opp]."""
    if not trajs or any(len(t) == 0 for t in trajs):
        raise ContractError("cannot encode an empty trajectory")
    obs = np.stack([t.obs for t in trajs], axis=1)
    acts = np.stack([t.actions for t in trajs], axis=1)
    return np.concatenate([obs, _one_hot_seq(acts, n_actions)], axis=-1)


def local_inputs(trajs: Sequence[LocalTrajectory], n_actions: int, inputs: str = "full") -> np.ndarray:
    """(H, B, obs_dim + n_actions + 2) array of [o; one-hot a; r; d], masked per ``inputs``."""
    if not trajs or any(len(t) == 0 for t in trajs):
        raise ContractError("cannot encode an empty trajectory")
    obs = np.stack([t.obs for t in trajs], axis=1)
    acts = np.stack([t.actions for t in trajs], axis=1)
    rew = np.stack([t.rewards for t in trajs], axis=1)[..., None]
    done = np.stack([t.dones for t in trajs], axis=1)[..., None].astype(float)
    return build_local_step(obs, acts, rew, done, n_actions, inputs)


def build_local_step(obs, actions, rewards, dones, n_actions: int, inputs: str = "full") -> np.ndarray:
    """Assemble [o; one-hot a; r; d] for any leading shape."""
    keep_o, keep_a, keep_r, keep_d = INPUT_MASKS[inputs]
    actions = np.asarray(actions, dtype=int)
    parts = [
        np.asarray(obs, dtype=float) * keep_o,
        _one_hot_seq(actions, n_actions) * keep_a,
        np.asarray(rewards, dtype=float).reshape(actions.shape + (1,)) * keep_r,
        np.asarray(dones, dtype=float).reshape(actions.shape + (1,)) * keep_d,
    ]
    return np.concatenate(parts, axis=-1)


def encode_opponent(trajs, model: OpponentModel) -> PosteriorSequence:
    if isinstance(trajs, OpponentTrajectory):
        trajs = [trajs]
    return model.encoder(opponent_inputs(trajs, model.opp_n_actions))


def encode_self(trajs, model: OpponentModel, inputs: str | None = None) -> PosteriorSequence:
    """Posteriors from local information only; takes ``LocalTrajectory`` objects."""
    if isinstance(trajs, LocalTrajectory):
        trajs = [trajs]
    return model.encoder(local_inputs(trajs, model.n_actions, inputs or model.inputs))
