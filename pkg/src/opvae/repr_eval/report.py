"""Per-timestep representation report: MI estimate plus separation metrics."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingSet
from .mine import MineConfig, mine_estimate
from .separation import separation_metrics


def representation_report(method: str, emb: EmbeddingSet, timesteps=None, mine_cfg: MineConfig | None = None,
                          rng: np.random.Generator | None = None, latent: str = "mean") -> list[dict]:
    rng = np.random.default_rng(0) if rng is None else rng
    timesteps = sorted(set(emb.t.tolist())) if timesteps is None else timesteps
    rows = []
    for t in timesteps:
        sub = emb.at(t)
        z = sub.latents(latent, rng)
        ids = sub.opponent_id.astype(str)
        mi = mine_estimate(z, ids, mine_cfg, rng)
        sep = separation_metrics(z, ids)
        rows.append({"method": method, "timestep": int(t), "mi_nats": mi.mi_nats, "ratio": sep["ratio"],
                     "accuracy": sep["accuracy"], "n_samples": sep["n_samples"]})
    return rows


def write_report(rows: list[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rows, indent=2))
    return path
