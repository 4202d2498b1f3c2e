"""Command-line entry point: ``opvae <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..envs.trajectory import record_pool
from ..repr_eval import collect_embeddings, representation_report, write_report
from ..rl.agents import evaluate_policy
from ..vae.pretrain import reconstruction_accuracy
from . import summary as agg
from .ablation import AXES, ablation_matrix
from .config import ExperimentConfig, UsageError, builtin_config, parse_seeds
from .plots import plot_curves
from .runner import load_or_pretrain_vae, load_records, load_trained, run, run_dir_for

log = logging.getLogger("opvae")


def _load_config(source: str | None) -> ExperimentConfig:
    if source is None:
        return ExperimentConfig.from_dict({})
    path = Path(source)
    if not path.exists() and not path.suffix:
        path = builtin_config(spec)
    return ExperimentConfig.from_file(path)


def _seeds(args, cfg: ExperimentConfig) -> list[int]:
    if getattr(args, "seed", None) is not None:
        return [args.seed]
    if getattr(args, "seeds", None):
        return parse_seeds(args.seeds)
    return cfg.seeds


def _progress(seed, episodes, res):
    log.info("seed %d  episodes %6d  weak %.2f  strong %.2f", seed, episodes,
             res["train"].mean_return, res["test"].mean_return)


def cmd_train_vae(args) -> int:
    cfg = _load_config(args.config)
    if cfg.family != "omddpg":
        raise UsageError("train-vae pretrains the opponent-conditioned VAE; use an omddpg config")
    for seed in _seeds(args, cfg):
        rdir = run_dir_for(cfg, seed, args.out)
        rdir.mkdir(parents=True, exist_ok=True)
        env, pool = cfg.make_env()
        rng = np.random.default_rng(seed)
        model = load_or_pretrain_vae(cfg, env, pool, rng, rdir)
        held = record_pool(env, pool.train, None, 50, np.random.default_rng([seed, 1]))
        acc = reconstruction_accuracy(model, held)
        print(json.dumps({"seed": seed, "checkpoint": str(rdir / "vae.json"), "reconstruction_accuracy": acc}))
    return 0


def cmd_train_rl(args) -> int:
    cfg = _load_config(args.config)
    records = run(cfg, args.out, seeds=_seeds(args, cfg), resume=args.resume, progress=_progress)
    failed = 0
    for r in records:
        weak = r.evals("train")
        strong = r.evals("test")
        print(json.dumps({
            "seed": r.seed, "method": r.method, "status": r.status, "episodes": r.episodes,
            "weak": weak[-1]["mean_return"] if weak else None,
            "strong": strong[-1]["mean_return"] if strong else None,
            "run_dir": r.run_dir, "wall_clock": round(r.wall_clock, 1),
        }))
        if r.status != "complete":
            failed += 1
            print(r.error, file=sys.stderr)
    return 1 if failed else 0


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    for seed in _seeds(args, cfg):
        rdir = run_dir_for(cfg, seed, args.out)
        env, pool, trainer = load_trained(cfg, rdir)
        envs = [copy.deepcopy(env) for _ in range(8)]
        res = evaluate_policy(trainer.agent, envs, pool, args.pool, cfg["train"]["eval_episodes"],
                              np.random.default_rng([seed, 31]))
        doc = {"seed": seed, **res.to_dict()}
        (rdir / f"eval_{args.pool}.json").write_text(json.dumps(doc, indent=1))
        print(json.dumps(doc))
    return 0


def cmd_mi(args) -> int:
    cfg = _load_config(args.config)
    ecfg = cfg["embeddings"]
    for seed in _seeds(args, cfg):
        rdir = run_dir_for(cfg, seed, args.out)
        env, pool, trainer = load_trained(cfg, rdir)
        opps = pool.split(args.pool)
        emb = collect_embeddings(trainer.agent.model, env, opps, np.random.default_rng([seed, 41]),
                                 n_episodes=ecfg["n_episodes"], timesteps=tuple(ecfg["timesteps"]),
                                 agent=trainer.agent)
        emb.to_csv(rdir / f"embeddings_{args.pool}.csv")
        rows = representation_report(cfg.variant, emb, ecfg["timesteps"], cfg.mine(),
                                     np.random.default_rng([seed, 43]), latent=ecfg["latent"])
        write_report(rows, rdir / f"mi_{args.pool}.json")
        for row in rows:
            print(json.dumps({"seed": seed, **row}))
    return 0


def cmd_ablate(args) -> int:
    base = _load_config(args.config)
    configs = ablation_matrix(base, args.axis)
    out = Path(args.out)
    status = 0
    for cfg in configs:
        path = cfg.save(out / "configs" / f"{args.axis}_{cfg.variant}.yaml")
        print(f"{cfg.variant}\t{cfg.config_hash()}\t{path}")
        if not args.dry_run:
            records = run(cfg, out, seeds=_seeds(args, cfg), resume=args.resume, progress=_progress)
            status |= any(r.status != "complete" for r in records)
    return int(status)


def cmd_aggregate(args) -> int:
    rows = agg.aggregate(load_records(args.out))
    csv_path, json_path = agg.write_summary(rows, args.out)
    for row in agg.final_points(rows):
        flag = f"  [{row['flag']}]" if row["flag"] else ""
        print(f"{row['experiment']}\t{row['method']}\t{row['pool']}\tstep={row['step']}\t"
              f"{row['mean']:.3f} +/- {row['half_width']:.3f} (n={row['n_seeds']}){flag}")
    print(f"wrote {csv_path} and {json_path}")
    return 0


def cmd_export(args) -> int:
    rows = agg.aggregate(load_records(args.out))
    tidy = agg.write_tidy(rows, Path(args.out) / "curves.csv")
    figs = plot_curves(rows, Path(args.out) / "figures")
    print(tidy.read_text(), end="")
    print(f"# wrote {tidy}")
    for f in figs:
        print(f"# wrote {f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opvae", description="Opponent-modelling VAE experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeds=True, config=True):
        if config:
            sp.add_argument("--config", help="YAML config path or packaged config name (e.g. pd_sma2c)")
        if seeds:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--seed", type=int)
            g.add_argument("--seeds", help="A..B inclusive range or comma list")
        sp.add_argument("--out", default="runs", help="output directory")

    sp = sub.add_parser("train-vae", help="pretrain the opponent-conditioned VAE")
    common(sp)
    sp.set_defaults(func=cmd_train_vae)

    sp = sub.add_parser("train-rl", help="train agents with periodic weak/strong evaluation")
    common(sp)
    sp.add_argument("--resume", action="store_true")
    sp.set_defaults(func=cmd_train_rl)

    sp = sub.add_parser("eval", help="evaluate a trained checkpoint against one pool")
    common(sp)
    sp.add_argument("--pool", choices=("train", "test"), default="test")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("mi", help="embedding MI and separation report")
    common(sp)
    sp.add_argument("--pool", choices=("train", "test"), default="train")
    sp.set_defaults(func=cmd_mi)

    sp = sub.add_parser("ablate", help="expand and run an ablation axis")
    common(sp)
    sp.add_argument("--axis", choices=sorted(AXES), required=True)
    sp.add_argument("--resume", action="store_true")
    sp.add_argument("--dry-run", action="store_true", help="only write the expanded configs")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("aggregate", help="mean and 95%% CI across seeds")
    common(sp, seeds=False, config=False)
    sp.set_defaults(func=cmd_aggregate)

    sp = sub.add_parser("export", help="tidy CSV plus PNG learning curves")
    common(sp, seeds=False, config=False)
    sp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
