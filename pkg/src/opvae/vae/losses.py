"""Sequential beta-VAE losses for both opponent models.

All losses are to be minimised and are averaged over the batch of
trajectories; each trajectory contributes the sum over its timesteps.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import grad as G
from ..envs.base import ContractError
from ..envs.trajectory import LocalTrajectory, OpponentTrajectory
from ..grad import DiagGaussianParams, Tensor
from .model import OpponentDecoder, OpponentModel, PosteriorSequence, _one_hot_seq, local_inputs, opponent_inputs


def discrimination(z_plus, z_minus, z) -> Tensor:
    """1 / (1 + exp(|z - z_minus| - |z - z_plus|))^2, row-wise for batched input.

    Small when the anchor ``z`` sits much closer to ``z_plus`` (same opponent)
    than to ``z_minus`` (different opponent).
    """
    z_plus, z_minus, z = G.as_tensor(z_plus), G.as_tensor(z_minus), G.as_tensor(z)
    if not (z_plus.shape == z_minus.shape == z.shape):
        raise ContractError(f"embedding sizes differ: {z_plus.shape}, {z_minus.shape}, {z.shape}")
    gap = G.norm(z - z_minus) - G.norm(z - z_plus)
    s = G.sigmoid(-gap)
    return s * s


def sample_latents(posts: Sequence[DiagGaussianParams], noise: np.ndarray) -> list[Tensor]:
    """One reparameterised draw per timestep; ``noise`` has shape (H, B, Z)."""
    return [G.reparam_sample(p, n) for p, n in zip(posts, noise)]


def reconstruction_nll(decoder: OpponentDecoder, opp_obs: np.ndarray, opp_actions: np.ndarray, zs: Sequence[Tensor]) -> Tensor:
    """-sum_t log p(a_opp_t | o_opp_t, z_t), averaged over the batch."""
    H, B = opp_actions.shape
    z = G.concat(list(zs), axis=0)  # (H*B, Z), time-major
    logp = G.log_softmax(decoder(opp_obs.reshape(H * B, -1), z))
    target = _one_hot_seq(opp_actions.reshape(-1), decoder.n_actions)
    return -(logp * target).sum() * (1.0 / B)


def kl_sequence(posts: Sequence[DiagGaussianParams]) -> Tensor:
    """sum_t KL(q(z_t | prefix) || N(0, I)), averaged over the batch."""
    B = posts[0].mean.shape[0]
    joint = DiagGaussianParams(G.concat([p.mean for p in posts], axis=0), G.concat([p.log_std for p in posts], axis=0))
    return G.kl_to_standard_normal(joint) * (1.0 / B)


def _noise(rng, posts: PosteriorSequence, noise):
    shape = (len(posts), *posts[0].mean.shape)
    if noise is None:
        return rng.standard_normal(shape)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != shape:
        raise ContractError(f"noise shape {noise.shape}, expected {shape}")
    return noise


def elbo_terms(model: OpponentModel, posts: PosteriorSequence, opp_obs, opp_actions, noise) -> tuple[Tensor, Tensor, list[Tensor]]:
    zs = sample_latents(posts.posteriors, noise)
    return reconstruction_nll(model.decoder, opp_obs, opp_actions, zs), kl_sequence(posts.posteriors), zs


def _opp_arrays(trajs: Sequence[OpponentTrajectory]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([t.obs for t in trajs], axis=1), np.stack([t.actions for t in trajs], axis=1)


def om_vae_loss(
    model: OpponentModel,
    anchor: Sequence[OpponentTrajectory],
    positive: Sequence[OpponentTrajectory] | None = None,
    negative: Sequence[OpponentTrajectory] | None = None,
    beta: float = 0.01,
    lam: float = 1.0,
    rng: np.random.Generator | None = None,
    noise=None,
) -> tuple[Tensor, dict]:
    """Negative lower bound: recon NLL + beta * KL + lam * d(E z+, E z-, E z).

    The discrimination term uses the final-timestep posterior means of the
    anchor, a same-opponent episode and a different-opponent episode.
    """
    if isinstance(anchor, OpponentTrajectory):
        anchor = [anchor]
    rng = np.random.default_rng() if rng is None else rng
    posts = model.encoder(opponent_inputs(anchor, model.opp_n_actions))
    opp_obs, opp_actions = _opp_arrays(anchor)
    recon, kl, _ = elbo_terms(model, posts, opp_obs, opp_actions, _noise(rng, posts, noise))
    loss = recon + kl * beta
    parts = {"recon": recon.item(), "kl": kl.item(), "disc": 0.0}
    if lam:
        if positive is None or negative is None:
            raise ContractError("discrimination needs positive and negative trajectories")
        if len(positive) != len(anchor) or len(negative) != len(anchor):
            raise ContractError("triplet batches must have equal size")
        z_pos = model.encoder(opponent_inputs(positive, model.opp_n_actions))[-1].mean
        z_neg = model.encoder(opponent_inputs(negative, model.opp_n_actions))[-1].mean
        disc = discrimination(z_pos, z_neg, posts[-1].mean).mean()
        loss = loss + disc * lam
        parts["disc"] = disc.item()
    parts["total"] = loss.item()
    return loss, parts


def self_vae_loss(
    model: OpponentModel,
    local: Sequence[LocalTrajectory],
    opp: Sequence[OpponentTrajectory],
    beta: float = 0.01,
    rng: np.random.Generator | None = None,
    noise=None,
) -> tuple[Tensor, dict]:
    """recon NLL of opponent actions from z ~ q(z | local trajectory) + beta * KL.

    Opponent data only enters as reconstruction targets.
    """
    if isinstance(local, LocalTrajectory):
        local = [local]
    if isinstance(opp, OpponentTrajectory):
        opp = [opp]
    if len(local) != len(opp) or any(len(a) != len(b) for a, b in zip(local, opp)):
        raise ContractError("local and opponent trajectories are misaligned")
    rng = np.random.default_rng() if rng is None else rng
    posts = model.encoder(local_inputs(local, model.n_actions, model.inputs))
    opp_obs, opp_actions = _opp_arrays(opp)
    recon, kl, _ = elbo_terms(model, posts, opp_obs, opp_actions, _noise(rng, posts, noise))
    loss = recon + kl * beta
    return loss, {"recon": recon.item(), "kl": kl.item(), "total": loss.item()}
