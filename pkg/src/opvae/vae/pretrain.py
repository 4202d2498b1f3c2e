"""Offline training of the opponent-conditioned VAE on recorded episodes."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .. import grad as G
from ..envs.trajectory import EpisodeRecord
from .model import OpponentModel, encode_opponent
from .losses import om_vae_loss

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass
class VAEConfig:
    latent: int = 8
    enc_hidden: int = 64
    dec_hidden: tuple = (64, 64)
    beta: float = 0.01
    lam: float = 1.0
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    max_grad_norm: float = 0.5
    episodes_per_opponent: int = 200

    @classmethod
    def from_dict(cls, d: dict | None) -> "VAEConfig":
        d = dict(d or {})
        if "dec_hidden" in d:
            d["dec_hidden"] = tuple(d["dec_hidden"])
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dec_hidden"] = list(self.dec_hidden)
        return out


@dataclass
class TripletSampler:
    """Anchor/positive/negative episode indices for the discrimination term.

    Positive: another episode of the anchor's opponent. Negative: an episode
    of a uniformly chosen different opponent.
    """

    opponent_ids: Sequence[str]
    by_opponent: dict = field(init=False)

    def __post_init__(self):
        self.by_opponent = defaultdict(list)
        for i, oid in enumerate(self.opponent_ids):
            self.by_opponent[oid].append(i)
        self.keys = sorted(self.by_opponent)

    def validate(self, required: Sequence[str] | None, need_triplets: bool) -> None:
        missing = sorted(set(required or ()) - set(self.keys))
        if missing:
            raise DataError(f"dataset has no episodes for opponents {missing}")
        if need_triplets:
            if len(self.keys) < 2:
                raise DataError("discrimination needs episodes from at least two opponents")
            thin = [k for k in self.keys if len(self.by_opponent[k]) < 2]
            if thin:
                raise DataError(f"opponents {thin} have fewer than two episodes")

    def sample(self, anchors: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        pos, neg = [], []
        for a in anchors:
            oid = self.opponent_ids[a]
            same = self.by_opponent[oid]
            p = a
            while p == a:
                p = same[int(rng.integers(len(same)))]
            others = [k for k in self.keys if k != oid]
            k = others[int(rng.integers(len(others)))]
            pool = self.by_opponent[k]
            pos.append(p)
            neg.append(pool[int(rng.integers(len(pool)))])
        return np.array(pos), np.array(neg)


def pretrain_om_vae(
    records: Sequence[EpisodeRecord],
    env,
    cfg: VAEConfig | None = None,
    rng: np.random.Generator | None = None,
    required_opponents: Sequence[str] | None = None,
    model: OpponentModel | None = None,
) -> tuple[OpponentModel, list[dict]]:
    """Fit encoder and decoder; returns the model and per-epoch mean loss components."""
    cfg = cfg or VAEConfig()
    rng = np.random.default_rng(0) if rng is None else rng
    if not records:
        raise DataError("empty dataset")
    sampler = TripletSampler([r.opponent_id for r in records])
    sampler.validate(required_opponents, need_triplets=cfg.lam > 0)
    if model is None:
        model = OpponentModel(
            "opponent", env.obs_dim, env.n_actions, env.opp_obs_dim, env.opp_n_actions,
            latent=cfg.latent, enc_hidden=cfg.enc_hidden, dec_hidden=cfg.dec_hidden, rng=rng,
        )
    opt = G.Adam(model.parameters(), lr=cfg.lr, max_grad_norm=cfg.max_grad_norm)
    trajs = [r.tau_opp for r in records]
    history = []
    n = len(records)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        sums = defaultdict(float)
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            anchor = [trajs[i] for i in idx]
            positive = negative = None
            if cfg.lam > 0:
                p_idx, n_idx = sampler.sample(idx, rng)
                positive = [trajs[i] for i in p_idx]
                negative = [trajs[i] for i in n_idx]
            opt.zero_grad()
            loss, parts = om_vae_loss(model, anchor, positive, negative, cfg.beta, cfg.lam, rng)
            loss.backward()
            opt.step()
            for k, v in parts.items():
                sums[k] += v
            batches += 1
        row = {"epoch": epoch, **{k: v / batches for k, v in sums.items()}}
        history.append(row)
        log.info("om-vae epoch %d recon=%.4f kl=%.4f disc=%.4f", epoch, row["recon"], row["kl"], row["disc"])
    return model, history


def reconstruction_accuracy(model: OpponentModel, records: Sequence[EpisodeRecord], predictive: bool = False) -> float:
    """Fraction of opponent actions recovered by the decoder from posterior means.

    ``predictive=True`` decodes step t from the posterior over steps before t.
    """
    with G.no_grad():
        posts = encode_opponent([r.tau_opp for r in records], model)
        seq = posts.shifted() if predictive else posts.posteriors
        hits = total = 0
        for t, post in enumerate(seq):
            obs = np.stack([r.tau_opp.obs[t] for r in records])
            target = np.array([r.tau_opp.actions[t] for r in records])
            pred = np.argmax(model.decoder(obs, post.mean).data, axis=-1)
            hits += int((pred == target).sum())
            total += len(target)
    return hits / total
