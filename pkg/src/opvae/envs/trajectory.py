"""Episode containers, trajectory recording and the JSONL dataset format."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .base import ContractError


@dataclass
class OpponentTrajectory:
    obs: np.ndarray  # (H, opp_obs_dim)
    actions: np.ndarray  # (H,) int

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=float)
        self.actions = np.asarray(self.actions, dtype=int)
        if self.obs.ndim != 2 or len(self.obs) != len(self.actions):
            raise ContractError("opponent trajectory obs/actions are misaligned")

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class LocalTrajectory:
    obs: np.ndarray  # (H, obs_dim)
    actions: np.ndarray  # (H,) int
    rewards: np.ndarray  # (H,)
    dones: np.ndarray  # (H,) bool

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=float)
        self.actions = np.asarray(self.actions, dtype=int)
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.dones = np.asarray(self.dones, dtype=bool)
        n = len(self.actions)
        if self.obs.ndim != 2 or len(self.obs) != n or len(self.rewards) != n or len(self.dones) != n:
            raise ContractError("local trajectory fields are misaligned")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())


@dataclass
class EpisodeRecord:
    opponent_id: str
    tau: LocalTrajectory
    tau_opp: OpponentTrajectory
    episode_id: int = 0

    def to_json(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "opponent_id": self.opponent_id,
            "tau": [
                {"obs": o.tolist(), "action": int(a), "reward": float(r), "done": bool(d)}
                for o, a, r, d in zip(self.tau.obs, self.tau.actions, self.tau.rewards, self.tau.dones)
            ],
            "tau_opp": [{"obs": o.tolist(), "action": int(a)} for o, a in zip(self.tau_opp.obs, self.tau_opp.actions)],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EpisodeRecord":
        tau = doc["tau"]
        opp = doc["tau_opp"]
        return cls(
            opponent_id=doc["opponent_id"],
            episode_id=int(doc.get("episode_id", 0)),
            tau=LocalTrajectory(
                obs=[s["obs"] for s in tau],
                actions=[s["action"] for s in tau],
                rewards=[s["reward"] for s in tau],
                dones=[s["done"] for s in tau],
            ),
            tau_opp=OpponentTrajectory(obs=[s["obs"] for s in opp], actions=[s["action"] for s in opp]),
        )


def random_policy(n_actions: int) -> Callable:
    def act(obs, rng: np.random.Generator) -> int:
        return int(rng.integers(n_actions))

    return act


def run_episode(env, opponent, policy: Callable, rng: np.random.Generator, seed=None, episode_id: int = 0) -> EpisodeRecord:
    """Roll out one full episode of ``policy(agent_obs, rng) -> action``."""
    step = env.reset(opponent, seed=seed)
    obs, opp_obs = step.observations
    rec = {k: [] for k in ("obs", "act", "rew", "done", "oobs", "oact")}
    while not step.done:
        a = policy(obs, rng)
        nxt = env.step(a)
        rec["obs"].append(obs)
        rec["act"].append(a)
        rec["rew"].append(nxt.reward)
        rec["done"].append(nxt.done)
        rec["oobs"].append(opp_obs)
        rec["oact"].append(nxt.opponent_action)
        obs, opp_obs = nxt.observations
        step = nxt
    return EpisodeRecord(
        opponent_id=opponent.id,
        episode_id=episode_id,
        tau=LocalTrajectory(rec["obs"], rec["act"], rec["rew"], rec["done"]),
        tau_opp=OpponentTrajectory(rec["oobs"], rec["oact"]),
    )


def record_trajectories(env, opponent, policy: Callable | None, K: int, rng: np.random.Generator, start_id: int = 0) -> list[EpisodeRecord]:
    """K aligned (tau, tau_opp) episode pairs against one opponent."""
    if K < 1:
        raise ContractError("K must be at least 1")
    policy = policy or random_policy(env.n_actions)
    return [run_episode(env, opponent, policy, rng, episode_id=start_id + k) for k in range(K)]


def record_pool(env, opponents: Iterable, policy: Callable | None, K: int, rng: np.random.Generator) -> list[EpisodeRecord]:
    out: list[EpisodeRecord] = []
    for opp in opponents:
        out.extend(record_trajectories(env, opp, policy, K, rng, start_id=len(out)))
    return out


def save_jsonl(records: Iterable[EpisodeRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json()) + "\n")
    return path


def load_jsonl(path) -> list[EpisodeRecord]:
    with open(path) as fh:
        return [EpisodeRecord.from_json(json.loads(line)) for line in fh if line.strip()]
