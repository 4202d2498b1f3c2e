"""SMA2C: self-conditioned VAE trained jointly with A2C.

One iteration rolls out a full episode in each of ``n_envs`` environments
with the graph attached, then takes a single optimizer step on
``a2c_loss + c_vae * self_vae_loss``. Actor and critic gradients reach the
encoder through the sampled latents.
"""
from __future__ import annotations

import copy

import numpy as np

from .. import grad as G
from ..vae.losses import kl_sequence, reconstruction_nll, sample_latents
from ..vae.model import OpponentModel
from .a2c import A2CConfig, ActorCritic, a2c_loss, sample_actions
from .agents import SMA2CAgent
from .gae import gae_advantages


def build_sma2c_agent(env, cfg: A2CConfig, rng: np.random.Generator) -> SMA2CAgent:
    model = OpponentModel(
        "self", env.obs_dim, env.n_actions, env.opp_obs_dim, env.opp_n_actions,
        latent=cfg.latent, enc_hidden=cfg.enc_hidden, dec_hidden=cfg.dec_hidden, inputs=cfg.inputs, rng=rng,
    )
    ac = ActorCritic(env.obs_dim + cfg.latent, env.n_actions, cfg.hidden, rng)
    return SMA2CAgent(model, ac, z_mode=cfg.z_mode)


class SMA2CTrainer:
    def __init__(self, env, pool, cfg: A2CConfig, rng: np.random.Generator, agent: SMA2CAgent | None = None):
        self.cfg = cfg
        self.pool = pool
        self.rng = rng
        self.envs = [copy.deepcopy(env) for _ in range(cfg.n_envs)]
        self.agent = agent or build_sma2c_agent(env, cfg, rng)
        self.opt = G.Adam(self.agent.parameters(), lr=cfg.lr, max_grad_norm=cfg.max_grad_norm)
        self.episodes = 0
        self.updates = 0

    def rollout_and_loss(self, c_vae: float | None = None):
        """Run one batch of episodes and build the joint loss (graph attached)."""
        cfg = self.cfg
        c_vae = cfg.c_vae if c_vae is None else c_vae
        agent, rng = self.agent, self.rng
        opps = [self.pool.sample(rng, "train") for _ in self.envs]
        seeds = rng.integers(2**31, size=len(self.envs))
        steps = [env.reset(o, seed=int(s)) for env, o, s in zip(self.envs, opps, seeds)]
        agent.reset(steps)
        # the opponent's first observation is a training-time reconstruction target
        opp_obs_now = np.stack([s.opponent_obs for s in steps])
        logits_seq, value_seq, actions, rewards, dones = [], [], [], [], []
        posts, opp_obs, opp_actions = [], [], []
        done = False
        while not done:
            logits, values, _ = agent.forward(rng)
            a = sample_actions(logits.data, rng)
            steps = [env.step(int(x)) for env, x in zip(self.envs, a)]
            logits_seq.append(logits)
            value_seq.append(values)
            actions.append(a)
            rewards.append([s.reward for s in steps])
            dones.append([s.done for s in steps])
            opp_obs.append(opp_obs_now)
            opp_actions.append([s.opponent_action for s in steps])
            opp_obs_now = np.stack([s.opponent_obs for s in steps])
            agent.observe(a, steps)
            posts.append(agent.post)
            done = steps[0].done
        rewards = np.array(rewards)
        dones = np.array(dones, dtype=float)
        values = G.concat(value_seq, axis=0)
        adv, ret = gae_advantages(
            rewards * cfg.reward_scale, values.data.reshape(rewards.shape), 0.0, cfg.gamma, cfg.gae_lambda, dones
        )
        loss, parts = a2c_loss(
            G.concat(logits_seq, axis=0), np.array(actions), adv, values, ret, cfg.ent_coef, cfg.vf_coef
        )
        opp_obs = np.stack(opp_obs)
        opp_actions = np.array(opp_actions, dtype=int)
        noise = rng.standard_normal((len(posts), *posts[0].mean.shape))
        recon = reconstruction_nll(agent.model.decoder, opp_obs, opp_actions, sample_latents(posts, noise))
        kl = kl_sequence(posts)
        vae = recon + kl * cfg.beta
        if c_vae:
            loss = loss + vae * c_vae
        parts.update(recon=recon.item(), kl=kl.item(), vae=vae.item(), total=loss.item())
        parts["train_return"] = float(rewards.sum(axis=0).mean())
        return loss, parts

    def iterate(self) -> dict:
        self.opt.zero_grad()
        loss, parts = self.rollout_and_loss()
        loss.backward()
        parts["grad_norm"] = self.opt.step()
        self.episodes += len(self.envs)
        self.updates += 1
        return parts

    # -- persistence --------------------------------------------------------
    def params(self) -> dict:
        out = {f"model.{k}": v for k, v in self.agent.model.state_dict().items()}
        out.update({f"ac.{k}": v for k, v in self.agent.ac.state_dict().items()})
        return out

    def load_params(self, params: dict) -> None:
        self.agent.model.load_state_dict({k[6:]: v for k, v in params.items() if k.startswith("model.")})
        self.agent.ac.load_state_dict({k[3:]: v for k, v in params.items() if k.startswith("ac.")})
