"""Collecting per-episode posterior embeddings and dumping them to CSV."""
from __future__ import annotations

import copy
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import grad as G
from ..envs.base import ContractError
from ..envs.trajectory import EpisodeRecord, LocalTrajectory, OpponentTrajectory, record_trajectories
from ..vae.model import OpponentModel, encode_opponent, encode_self

DEFAULT_TIMESTEPS = (15, 20, 25)


@dataclass
class EmbeddingSet:
    """Flat table of posteriors: one row per (episode, timestep)."""

    episode_id: np.ndarray
    opponent_id: np.ndarray
    t: np.ndarray
    mean: np.ndarray
    log_std: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def at(self, t: int) -> "EmbeddingSet":
        keep = self.t == t
        if not keep.any():
            raise ContractError(f"no embeddings recorded at timestep {t}")
        return EmbeddingSet(self.episode_id[keep], self.opponent_id[keep], self.t[keep], self.mean[keep], self.log_std[keep])

    def latents(self, mode: str = "mean", rng: np.random.Generator | None = None) -> np.ndarray:
        if mode == "mean":
            return self.mean
        if mode == "sample":
            rng = np.random.default_rng(0) if rng is None else rng
            return self.mean + np.exp(self.log_std) * rng.standard_normal(self.mean.shape)
        raise ValueError(f"unknown latent mode {mode!r}")

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        Z = self.mean.shape[1]
        header = ["episode_id", "opponent_id", "t"] + [f"mean_{i}" for i in range(Z)] + [f"log_std_{i}" for i in range(Z)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(len(self)):
                w.writerow([int(self.episode_id[i]), self.opponent_id[i], int(self.t[i]),
                            *map(repr, self.mean[i].tolist()), *map(repr, self.log_std[i].tolist())])
        return path

    @classmethod
    def from_csv(cls, path) -> "EmbeddingSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        Z = sum(h.startswith("mean_") for h in header)
        return cls(
            np.array([int(r[0]) for r in body], dtype=int),
            np.array([r[1] for r in body], dtype=object),
            np.array([int(r[2]) for r in body], dtype=int),
            np.array([[float(x) for x in r[3 : 3 + Z]] for r in body]).reshape(-1, Z),
            np.array([[float(x) for x in r[3 + Z : 3 + 2 * Z]] for r in body]).reshape(-1, Z),
        )


def record_agent_episodes(agent, env, opponent, n: int, rng: np.random.Generator, greedy: bool = False,
                          n_envs: int = 8, start_id: int = 0) -> list[EpisodeRecord]:
    """Roll out ``agent`` against one opponent and keep both trajectory views."""
    if n < 1:
        raise ContractError("need at least one episode")
    envs = [copy.deepcopy(env) for _ in range(min(n_envs, n))]
    records: list[EpisodeRecord] = []
    while len(records) < n:
        batch = envs[: min(len(envs), n - len(records))]
        steps = [e.reset(opponent, seed=int(s)) for e, s in zip(batch, rng.integers(2**31, size=len(batch)))]
        agent.reset(steps)
        buf = [{k: [] for k in ("obs", "act", "rew", "done", "oobs", "oact")} for _ in batch]
        done = False
        while not done:
            actions = agent.act(rng, greedy=greedy)
            nxt = [e.step(int(a)) for e, a in zip(batch, actions)]
            for b, s0, s1, a in zip(buf, steps, nxt, actions):
                b["obs"].append(s0.agent_obs)
                b["act"].append(int(a))
                b["rew"].append(s1.reward)
                b["done"].append(s1.done)
                b["oobs"].append(s0.opponent_obs)
                b["oact"].append(s1.opponent_action)
            agent.observe(actions, nxt)
            steps = nxt
            done = nxt[0].done
        for b in buf:
            records.append(EpisodeRecord(
                opponent_id=opponent.id,
                episode_id=start_id + len(records),
                tau=LocalTrajectory(b["obs"], b["act"], b["rew"], b["done"]),
                tau_opp=OpponentTrajectory(b["oobs"], b["oact"]),
            ))
    return records


def embed_records(model: OpponentModel, records: list[EpisodeRecord], timesteps=DEFAULT_TIMESTEPS,
                  chunk: int = 256) -> EmbeddingSet:
    """Posterior after consuming ``t`` steps, computed offline for each record."""
    if not records:
        raise ContractError("no records to embed")
    horizon = min(len(r.tau) for r in records)
    bad = [t for t in timesteps if t < 1 or t > horizon]
    if bad:
        raise ContractError(f"timesteps {bad} outside 1..{horizon}")
    cols = {"ep": [], "opp": [], "t": [], "mean": [], "log_std": []}
    for start in range(0, len(records), chunk):
        part = records[start : start + chunk]
        with G.no_grad():
            if model.kind == "opponent":
                posts = encode_opponent([r.tau_opp for r in part], model)
            else:
                posts = encode_self([r.tau for r in part], model)
        means, log_stds = posts.means(), posts.log_stds()
        for t in timesteps:
            cols["ep"].append([r.episode_id for r in part])
            cols["opp"].append([r.opponent_id for r in part])
            cols["t"].append([t] * len(part))
            cols["mean"].append(means[t - 1])
            cols["log_std"].append(log_stds[t - 1])
    return EmbeddingSet(
        np.concatenate(cols["ep"]).astype(int),
        np.concatenate(cols["opp"]).astype(object),
        np.concatenate(cols["t"]).astype(int),
        np.concatenate(cols["mean"]),
        np.concatenate(cols["log_std"]),
    )


def collect_embeddings(model: OpponentModel, env, opponents, rng: np.random.Generator, n_episodes: int = 200,
                       timesteps=DEFAULT_TIMESTEPS, agent=None, greedy: bool = False) -> EmbeddingSet:
    """Play ``n_episodes`` per opponent (with ``agent`` or uniformly random
    actions) and embed them at the requested timesteps."""
    records: list[EpisodeRecord] = []
    for opp in opponents:
        if agent is None:
            records += record_trajectories(env, opp, None, n_episodes, rng, start_id=len(records))
        else:
            records += record_agent_episodes(agent, env, opp, n_episodes, rng, greedy=greedy, start_id=len(records))
    return embed_records(model, records, timesteps)
