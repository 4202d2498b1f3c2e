"""Per-seed training runs with periodic weak/strong evaluation and resumable checkpoints."""
from __future__ import annotations

import copy
import json
import logging
import time
import traceback
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import grad as G
from ..envs.base import ConfigurationError, ContractError, UnsupportedError
from ..envs.matrix_game import optimal_return_oracle
from ..envs.trajectory import record_pool
from ..rl.agents import evaluate_policy
from ..rl.omddpg import OMDDPGTrainer
from ..rl.sma2c import SMA2CTrainer
from ..vae.model import OpponentModel
from ..vae.pretrain import pretrain_om_vae
from .config import ExperimentConfig

log = logging.getLogger(__name__)

CKPT = "ckpt.json"
VAE_CKPT = "vae.json"
BUFFER = "buffer.npz"
METRICS = "metrics.jsonl"
RECORD = "record.json"


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    method: str
    name: str
    status: str = "running"
    metrics: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    wall_clock: float = 0.0
    episodes: int = 0
    reached_target_at: int | None = None
    error: str | None = None
    run_dir: str = ""

    def evals(self, pool: str) -> list[dict]:
        return [m for m in self.metrics if m.get("kind") == "eval" and m.get("pool") == pool]

    def save(self, path=None) -> Path:
        path = Path(path or Path(self.run_dir) / RECORD)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(asdict(self), indent=1))
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path) -> "RunRecord":
        doc = json.loads(Path(path).read_text())
        return cls(**doc)


def run_dir_for(cfg: ExperimentConfig, seed: int, out) -> Path:
    return Path(out) / f"{cfg.name}-{cfg.config_hash()}" / f"seed_{seed}"


def oracle_optimum(env, pool) -> float:
    """Mean DP-optimal return over the training opponents."""
    return float(np.mean([optimal_return_oracle(env, o) for o in pool.train]))


# -- optimizer / rng persistence helpers ------------------------------------

def _opt_arrays(prefix: str, opt: G.Adam) -> tuple[dict, int]:
    st = opt.state_dict()
    arrays = {}
    for i, (m, v) in enumerate(zip(st.get("m", []), st.get("v", []))):
        arrays[f"{prefix}.m.{i}"] = m
        arrays[f"{prefix}.v.{i}"] = v
    return arrays, int(st["t"])


def _load_opt(prefix: str, opt: G.Adam, arrays: dict, t: int) -> None:
    n = len(opt.params)
    if t == 0:
        opt.load_state_dict({"t": 0})
        return
    opt.load_state_dict({
        "t": t,
        "m": [arrays[f"{prefix}.m.{i}"] for i in range(n)],
        "v": [arrays[f"{prefix}.v.{i}"] for i in range(n)],
    })


def _optimizers(trainer) -> dict[str, G.Adam]:
    if isinstance(trainer, SMA2CTrainer):
        return {"opt": trainer.opt}
    return {"actor_opt": trainer.ddpg.actor_opt, "critic_opt": trainer.ddpg.critic_opt}


def save_training_state(run_dir: Path, trainer, rng: np.random.Generator, extra: dict) -> Path:
    params = {f"p.{k}": v for k, v in trainer.params().items()}
    opt_t = {}
    for name, opt in _optimizers(trainer).items():
        arrays, opt_t[name] = _opt_arrays(f"o.{name}", opt)
        params.update(arrays)
    meta = {"episodes": trainer.episodes, "updates": trainer.updates, "opt_t": opt_t,
            "rng": rng.bit_generator.state, **extra}
    if isinstance(trainer, OMDDPGTrainer):
        tmp = run_dir / (BUFFER + ".tmp.npz")
        np.savez(tmp, **trainer.buffer.state_dict())
        tmp.replace(run_dir / BUFFER)
    return G.save_checkpoint(run_dir / CKPT, params, meta)


def load_training_state(run_dir: Path, trainer, rng: np.random.Generator | None = None) -> dict:
    arrays, meta = G.load_checkpoint(run_dir / CKPT)
    trainer.load_params({k[2:]: v for k, v in arrays.items() if k.startswith("p.")})
    for name, opt in _optimizers(trainer).items():
        _load_opt(f"o.{name}", opt, arrays, int(meta["opt_t"][name]))
    trainer.episodes, trainer.updates = int(meta["episodes"]), int(meta["updates"])
    if rng is not None:
        rng.bit_generator.state = meta["rng"]
    if isinstance(trainer, OMDDPGTrainer) and (run_dir / BUFFER).exists():
        with np.load(run_dir / BUFFER) as npz:
            trainer.buffer.load_state_dict({k: npz[k] for k in npz.files})
    return meta


# -- building trainers -------------------------------------------------------

def pretrain_vae(cfg: ExperimentConfig, env, pool, rng: np.random.Generator):
    """Collect random-policy episodes against the training pool and fit the OM-VAE."""
    vcfg = cfg.vae()
    records = record_pool(env, pool.train, None, vcfg.episodes_per_opponent, rng)
    return pretrain_om_vae(records, env, vcfg, rng, required_opponents=pool.ids("train"))


def fresh_vae(cfg: ExperimentConfig, env, rng) -> OpponentModel:
    v = cfg.vae()
    return OpponentModel("opponent", env.obs_dim, env.n_actions, env.opp_obs_dim, env.opp_n_actions,
                         latent=v.latent, enc_hidden=v.enc_hidden, dec_hidden=v.dec_hidden, rng=rng)


def load_or_pretrain_vae(cfg, env, pool, rng, run_dir: Path | None, metrics_out=None) -> OpponentModel:
    path = None if run_dir is None else run_dir / VAE_CKPT
    if path is not None and path.exists():
        params, meta = G.load_checkpoint(path)
        if meta.get("vae_hash") not in (None, cfg.vae_hash()):
            raise ConfigurationError(f"{path} was trained under a different config")
        model = OpponentModel.from_config(meta["model"])
        model.load_state_dict(params)
        rng.bit_generator.state = meta["rng"]
        return model
    model, history = pretrain_vae(cfg, env, pool, rng)
    if metrics_out is not None:
        for epoch, h in enumerate(history):
            metrics_out({"kind": "vae", "epoch": epoch, **h})
    if path is not None:
        G.save_checkpoint(path, model.state_dict(),
                          {"model": model.config(), "rng": rng.bit_generator.state, "vae_hash": cfg.vae_hash()})
    return model


def build_trainer(cfg: ExperimentConfig, env, pool, rng, model: OpponentModel | None = None):
    if cfg.family == "sma2c":
        return SMA2CTrainer(env, pool, cfg.a2c(), rng)
    return OMDDPGTrainer(env, pool, model, cfg.ddpg(), rng)


def load_trained(cfg: ExperimentConfig, run_dir) -> tuple:
    """Rebuild (env, pool, trainer) from the latest checkpoint in ``run_dir``."""
    run_dir = Path(run_dir)
    if not (run_dir / CKPT).exists():
        raise FileNotFoundError(f"no checkpoint in {run_dir}")
    env, pool = cfg.make_env()
    rng = np.random.default_rng(0)
    model = fresh_vae(cfg, env, rng) if cfg.family == "omddpg" else None
    trainer = build_trainer(cfg, env, pool, rng, model)
    load_training_state(run_dir, trainer)
    return env, pool, trainer


# -- the run loop ------------------------------------------------------------

def evaluate_both(trainer, env, pool, n_episodes: int, rng_seed) -> dict:
    envs = [copy.deepcopy(env) for _ in range(min(8, n_episodes))]
    out = {}
    for i, split in enumerate(("train", "test")):
        res = evaluate_policy(trainer.agent, envs, pool, split, n_episodes, np.random.default_rng([*rng_seed, i]))
        if res.hygiene_violations:
            raise ContractError(f"{res.hygiene_violations} pool hygiene violations in {split} evaluation")
        out[split] = res
    return out


def _read_metrics(path: Path, upto_episodes: int | None) -> list[dict]:
    if not path.exists():
        return []
    rows = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    if upto_episodes is None:
        return rows
    return [r for r in rows if r.get("episodes", -1) <= upto_episodes]


def run_seed(cfg: ExperimentConfig, seed: int, out, resume: bool = False, progress=None) -> RunRecord:
    rdir = run_dir_for(cfg, seed, out)
    rdir.mkdir(parents=True, exist_ok=True)
    cfg.save(rdir / "config.yaml")
    rec_path = rdir / RECORD
    if resume and rec_path.exists():
        prev = RunRecord.load(rec_path)
        if prev.status == "complete":
            return prev
    t0 = time.time()
    rng = np.random.default_rng(seed)
    env, pool = cfg.make_env()
    tcfg = cfg["train"]
    target = None
    if tcfg["target_fraction"] is not None:
        try:
            target = tcfg["target_fraction"] * oracle_optimum(env, pool)
        except UnsupportedError as exc:
            raise ConfigurationError(f"target_fraction needs a DP oracle: {exc}") from None

    resuming = resume and (rdir / CKPT).exists()
    metrics: list[dict] = []
    if resuming:
        _, meta = G.load_checkpoint(rdir / CKPT)
        metrics = _read_metrics(rdir / METRICS, int(meta["episodes"]))
    fh = open(rdir / METRICS, "w")
    for m in metrics:
        fh.write(json.dumps(m) + "\n")
    fh.flush()

    def emit(row: dict) -> None:
        metrics.append(row)
        fh.write(json.dumps(row) + "\n")
        fh.flush()

    rec = RunRecord(cfg.config_hash(), seed, cfg.variant, cfg.name, run_dir=str(rdir))
    try:
        model = None
        if cfg.family == "omddpg":
            model = load_or_pretrain_vae(cfg, env, pool, rng, rdir, None if resuming else emit)
        trainer = build_trainer(cfg, env, pool, rng, model)
        eval_index = 0
        if resuming:
            meta = load_training_state(rdir, trainer, rng)
            eval_index = int(meta["eval_index"])
            rec.reached_target_at = meta.get("reached_target_at")
        budget, every = int(tcfg["budget_episodes"]), int(tcfg["eval_every"])
        window: dict[str, list] = defaultdict(list)

        def do_eval() -> bool:
            nonlocal eval_index
            res = evaluate_both(trainer, env, pool, int(tcfg["eval_episodes"]), (seed, 7919, eval_index))
            ep = trainer.episodes
            if window:
                emit({"kind": "train", "episodes": ep, **{k: float(np.mean(v)) for k, v in window.items()}})
                window.clear()
            for split, r in res.items():
                emit({"kind": "eval", "episodes": ep, **r.to_dict()})
            eval_index += 1
            hit = target is not None and res["train"].mean_return >= target
            if hit and rec.reached_target_at is None:
                rec.reached_target_at = ep
            save_training_state(rdir, trainer, rng, {"eval_index": eval_index, "reached_target_at": rec.reached_target_at})
            if str(rdir / CKPT) not in rec.checkpoints:
                rec.checkpoints.append(str(rdir / CKPT))
            if progress:
                progress(seed, ep, res)
            return hit

        stop = False
        if not resuming:
            stop = do_eval()
        next_eval = (trainer.episodes // every + 1) * every
        while not stop and trainer.episodes < budget:
            parts = trainer.iterate()
            for k, v in parts.items():
                window[k].append(float(v))
            if trainer.episodes >= next_eval or trainer.episodes >= budget:
                stop = do_eval()
                next_eval = (trainer.episodes // every + 1) * every
        rec.status = "complete"
        rec.episodes = trainer.episodes
    except Exception as exc:  # a failing seed is recorded, siblings keep going
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"
        log.error("seed %d of %s failed: %s", seed, cfg.name, exc)
    finally:
        fh.close()
    rec.metrics = metrics
    rec.wall_clock = time.time() - t0
    rec.save(rec_path)
    return rec


def run(cfg: ExperimentConfig, out, seeds=None, resume: bool = False, progress=None) -> list[RunRecord]:
    """Train every seed of ``cfg``; returns one record per seed."""
    seeds = cfg.seeds if seeds is None else list(seeds)
    return [run_seed(cfg, s, out, resume=resume, progress=progress) for s in seeds]


def load_records(root) -> list[RunRecord]:
    return [RunRecord.load(p) for p in sorted(Path(root).rglob(RECORD))]
