"""OMDDPG: DDPG on observations augmented with latents from a frozen,
pretrained opponent-conditioned encoder."""
from __future__ import annotations

import copy

import numpy as np

from ..envs.base import ConfigurationError
from ..vae.model import OpponentModel
from .agents import OMDDPGAgent
from .buffer import ReplayBuffer
from .ddpg import DDPG, DDPGConfig


class OMDDPGTrainer:
    def __init__(self, env, pool, model: OpponentModel | None, cfg: DDPGConfig, rng: np.random.Generator):
        if model is None:
            raise ConfigurationError("OMDDPG needs a pretrained opponent-conditioned VAE")
        if model.kind != "opponent":
            raise ConfigurationError("OMDDPG needs an opponent-conditioned encoder, got a self-conditioned one")
        self.cfg = cfg
        self.pool = pool
        self.rng = rng
        self.model = model
        self.envs = [copy.deepcopy(env) for _ in range(cfg.n_envs)]
        self.ddpg = DDPG(env.obs_dim + model.latent, env.n_actions, cfg, rng)
        self.agent = OMDDPGAgent(model, self.ddpg.nets.actor, cfg.z_mode)
        self.buffer = ReplayBuffer(cfg.buffer_size, env.obs_dim, model.latent, env.n_actions)
        self.episodes = 0
        self.updates = 0

    def iterate(self) -> dict:
        """One lockstep batch of episodes with DDPG updates after every joint step."""
        cfg, rng, agent = self.cfg, self.rng, self.agent
        agent.epsilon = cfg.epsilon(self.episodes)
        opps = [self.pool.sample(rng, "train") for _ in self.envs]
        seeds = rng.integers(2**31, size=len(self.envs))
        steps = [env.reset(o, seed=int(s)) for env, o, s in zip(self.envs, opps, seeds)]
        agent.reset(steps)
        z = agent.current_z(rng)
        ret = np.zeros(len(self.envs))
        losses = {"critic_loss": 0.0, "actor_loss": 0.0}
        n_upd = 0
        done = False
        while not done:
            a = agent.act(rng, z=z)
            obs = agent.obs
            steps = [env.step(int(x)) for env, x in zip(self.envs, a)]
            agent.observe(a, steps)
            next_z = agent.current_z(rng)
            r = np.array([s.reward for s in steps])
            d = np.array([s.done for s in steps], dtype=float)
            self.buffer.add(obs, z, a, r, agent.obs, next_z, d)
            ret += r
            z = next_z
            done = steps[0].done
            if len(self.buffer) >= max(cfg.batch_size, cfg.warmup):
                for _ in range(cfg.updates_per_step):
                    out = self.ddpg.update(self.buffer.sample(cfg.batch_size, rng), rng)
                    for k in losses:
                        losses[k] += out[k]
                    n_upd += 1
        self.episodes += len(self.envs)
        self.updates += n_upd
        parts = {k: v / max(1, n_upd) for k, v in losses.items()}
        parts["train_return"] = float(ret.mean())
        parts["epsilon"] = agent.epsilon
        return parts

    def params(self) -> dict:
        out = {f"model.{k}": v for k, v in self.model.state_dict().items()}
        out.update({f"ddpg.{k}": v for k, v in self.ddpg.state_dict().items()})
        return out

    def load_params(self, params: dict) -> None:
        self.model.load_state_dict({k[6:]: v for k, v in params.items() if k.startswith("model.")})
        self.ddpg.load_state_dict({k[5:]: v for k, v in params.items() if k.startswith("ddpg.")})
