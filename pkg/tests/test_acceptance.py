"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected in the terminal
summary). The training-heavy checks share module-scoped runs so the whole
file stays in the tens of minutes on one CPU.
"""
import copy
import math
import time
import zlib

import numpy as np
import pytest

from opvae import grad as G
from opvae.envs import RepeatedMatrixGame, make_env, pd_pool, record_pool
from opvae.harness import ExperimentConfig, aggregate, builtin_config, final_points, mean_ci, oracle_optimum, run
from opvae.harness.ablation import ablation_matrix
from opvae.harness.runner import fresh_vae, load_trained, pretrain_vae
from opvae.repr_eval import (
    embed_records,
    heldout_centroid_accuracy,
    mine_estimate,
    record_agent_episodes,
    separation_ratio,
)
from opvae.rl import RandomAgent, evaluate_policy, gae_advantages
from opvae.vae import OpponentModel, discrimination, om_vae_loss

from _gradcases import PRIMITIVES, encoder_unroll

SEEDS = [0, 1, 2, 3, 4]
TEN_MINUTES = 600.0


def pd_config(name: str, **train) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(builtin_config(name))
    return cfg.with_overrides({"seeds": SEEDS, "train": {"target_fraction": 0.9, **train}})


@pytest.fixture(scope="module")
def sma2c_pd(tmp_path_factory):
    cfg = pd_config("pd_sma2c")
    return cfg, run(cfg, tmp_path_factory.mktemp("pd_sma2c"))


@pytest.fixture(scope="module")
def omddpg_pd(tmp_path_factory):
    cfg = pd_config("pd_omddpg")
    return cfg, run(cfg, tmp_path_factory.mktemp("pd_omddpg"))


def _reached(records, cfg):
    return [r.status == "complete" and r.reached_target_at is not None
            and r.reached_target_at <= cfg["train"]["budget_episodes"] and r.wall_clock < TEN_MINUTES
            for r in records]


def _seed_line(records):
    return ", ".join(f"s{r.seed}: {r.reached_target_at} ep / {r.wall_clock:.0f}s" for r in records)


# -- 1 ------------------------------------------------------------------------

def test_criterion_1_gradient_checks(criterion):
    t0 = time.time()
    worst = {}
    for name, make in PRIMITIVES.items():
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        worst[name] = max(G.gradcheck(*make(rng), max_coords=40, rng=rng) for _ in range(100))
    unrolls = {}
    for env_id in ("prisoners_dilemma", "speaker_listener"):
        env, _ = make_env({"id": env_id})
        dims = {"opponent": env.opp_obs_dim + env.opp_n_actions, "self": env.obs_dim + env.n_actions + 2}
        for kind, d in dims.items():
            rng = np.random.default_rng(zlib.crc32(f"{env_id}/{kind}".encode()))
            errs = []
            for _ in range(100):
                fn, params = encoder_unroll(rng, steps=25, input_dim=d, hidden=64, latent=8)
                errs.append(G.gradcheck(fn, params, max_coords=12, rng=rng))
            unrolls[f"{env_id}/{kind}"] = max(errs)
    elapsed = time.time() - t0
    ok = max(worst.values()) < 1e-4 and max(unrolls.values()) < 1e-3 and elapsed < 120
    criterion(1, "gradient checks", ok,
              f"{len(worst)} primitives worst {max(worst.values()):.1e}; encoder unrolls worst "
              f"{max(unrolls.values()):.1e}; {elapsed:.0f}s")


# -- 2 and 3 --------------------------------------------------------------------

def test_criterion_2_sma2c_reaches_oracle_fraction(criterion, sma2c_pd):
    cfg, records = sma2c_pd
    env, pool = cfg.make_env()
    target = 0.9 * oracle_optimum(env, pool)
    hits = _reached(records, cfg)
    criterion(2, f"SMA2C PD >= {target:.1f} (90% of oracle)", sum(hits) >= 4,
              f"{sum(hits)}/5 seeds; {_seed_line(records)}")


def test_criterion_3_embedding_identification(criterion, sma2c_pd):
    cfg, records = sma2c_pd
    accs = {}
    for r in records:
        if r.status != "complete":
            continue
        env, pool, trainer = load_trained(cfg, r.run_dir)
        rng = np.random.default_rng([r.seed, 3])
        ref, held = [], []
        for opp in pool.train:
            ref += record_agent_episodes(trainer.agent, env, opp, 100, rng, greedy=True)
            held += record_agent_episodes(trainer.agent, env, opp, 100, rng, greedy=True)
        model = trainer.agent.model
        z_ref, z_held = embed_records(model, ref, (25,)), embed_records(model, held, (25,))
        accs[r.seed] = heldout_centroid_accuracy(z_ref.mean, z_ref.opponent_id.astype(str),
                                                 z_held.mean, z_held.opponent_id.astype(str))
    trained = [s for s, r in zip(SEEDS, records) if r.reached_target_at is not None]
    ok = bool(trained) and all(accs[s] >= 0.95 for s in trained)
    criterion(3, "nearest-centroid identification >= 95% on 200 held-out episodes", ok,
              ", ".join(f"s{s}: {a:.3f}" for s, a in accs.items()))


# -- 4 --------------------------------------------------------------------------

def test_criterion_4_omddpg_reaches_oracle_fraction(criterion, omddpg_pd):
    cfg, records = omddpg_pd
    assert cfg["vae"]["lam"] == 1.0
    hits = _reached(records, cfg)
    criterion(4, "OMDDPG PD >= 90% of oracle", sum(hits) >= 4, f"{sum(hits)}/5 seeds; {_seed_line(records)}")


# -- 5 --------------------------------------------------------------------------

def test_criterion_5_mine_calibration(criterion):
    t0 = time.time()
    rng = np.random.default_rng(0)
    ids = np.repeat(np.arange(5), 200)
    rng.shuffle(ids)
    code = mine_estimate(np.eye(5)[ids], ids, rng=np.random.default_rng(1)).mi_nats

    z = rng.standard_normal((1000, 8))
    shuffled = mine_estimate(z, rng.permutation(ids), rng=np.random.default_rng(2)).mi_nats

    # same episodes embedded by a trained and an untrained opponent encoder
    cfg = ExperimentConfig.from_file(builtin_config("pd_omddpg"))
    env, pool = cfg.make_env()
    trained, _ = pretrain_vae(cfg, env, pool, np.random.default_rng(0))
    untrained = fresh_vae(cfg, env, np.random.default_rng(0))
    recs = record_pool(env, pool.train, None, 200, np.random.default_rng(9))
    mi = {}
    for label, model in (("trained", trained), ("untrained", untrained)):
        emb = embed_records(model, recs, (25,))
        zs = emb.latents("sample", np.random.default_rng(4))
        mi[label] = mine_estimate(zs, emb.opponent_id.astype(str), rng=np.random.default_rng(5)).mi_nats
    elapsed = time.time() - t0
    ok = abs(code - math.log(5)) < 0.15 and shuffled < 0.05 and mi["trained"] > mi["untrained"] and elapsed < 300
    criterion(5, "MINE calibration", ok,
              f"code {code:.3f} vs ln5 {math.log(5):.3f}; shuffled {shuffled:.3f}; trained {mi['trained']:.3f} "
              f"> untrained {mi['untrained']:.3f}; {elapsed:.0f}s")


# -- 6 --------------------------------------------------------------------------

def test_criterion_6_discrimination_ablation(criterion):
    with_disc, without = ablation_matrix(ExperimentConfig.from_file(builtin_config("pd_omddpg")), "discrimination")
    env, pool = with_disc.make_env()
    pairs = []
    for seed in SEEDS:
        held = record_pool(env, pool.train, None, 100, np.random.default_rng([seed, 6]))
        ids = np.array([r.opponent_id for r in held])
        ratios = []
        for cfg in (with_disc, without):
            model, _ = pretrain_vae(cfg, env, pool, np.random.default_rng(seed))
            ratios.append(separation_ratio(embed_records(model, held, (25,)).mean, ids))
        pairs.append(tuple(ratios))
    wins = sum(a > b for a, b in pairs)
    criterion(6, "lambda=1 separation ratio > lambda=0", wins >= 4,
              f"{wins}/5 pairs; " + ", ".join(f"{a:.2f} vs {b:.2f}" for a, b in pairs))


# -- 7 --------------------------------------------------------------------------

def test_criterion_7_locality(criterion, sma2c_pd, omddpg_pd):
    reads = {}
    for label, (cfg, records) in (("sma2c", sma2c_pd), ("omddpg", omddpg_pd)):
        rows = [m for r in records for m in r.metrics if m["kind"] == "eval"]
        env, pool, trainer = load_trained(cfg, records[0].run_dir)
        envs = [copy.deepcopy(env) for _ in range(8)]
        direct = evaluate_policy(trainer.agent, envs, pool, "test", 40, np.random.default_rng(7))
        reads[label] = (min(m["opponent_reads"] for m in rows), max(m["opponent_reads"] for m in rows),
                        direct.opponent_reads)
    ok = reads["sma2c"] == (0, 0, 0) and reads["omddpg"][0] > 0 and reads["omddpg"][2] > 0
    criterion(7, "SMA2C eval reads no opponent data, OMDDPG does", ok,
              f"sma2c min/max/direct {reads['sma2c']}; omddpg {reads['omddpg']}")


# -- 8 --------------------------------------------------------------------------

def _brute_gae(r, v, boot, gamma, lam):
    T = len(r)
    out = np.zeros(T)
    for t in range(T):
        for l in range(T - t):
            nxt = v[t + l + 1] if t + l + 1 < T else boot
            out[t] += (gamma * lam) ** l * (r[t + l] + gamma * nxt - v[t + l])
    return out


def test_criterion_8_oracles(criterion):
    rng = np.random.default_rng(8)
    gae_err = 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 26))
        r, v = rng.standard_normal(T), rng.standard_normal(T)
        boot, gamma, lam = rng.standard_normal(), rng.uniform(0, 1), rng.uniform(0, 1)
        adv, _ = gae_advantages(r, v, boot, gamma, lam)
        gae_err = max(gae_err, float(np.abs(adv - _brute_gae(r, v, boot, gamma, lam)).max()))

    env, pool = RepeatedMatrixGame(), pd_pool()
    model = OpponentModel("opponent", env.obs_dim, env.n_actions, env.opp_obs_dim, env.opp_n_actions)
    last = model.decoder.net.layers[-1]
    last.weight.data[:] = 0.0
    last.bias.data[:] = 0.0
    recs = record_pool(env, pool.train + pool.test, None, 5, rng)
    _, parts = om_vae_loss(model, [x.tau_opp for x in recs], beta=0.0, lam=0.0, rng=rng)
    recon_err = abs(parts["recon"] - env.horizon * math.log(env.opp_n_actions))

    zp, zm, z = (rng.standard_normal((1000, 8)) for _ in range(3))
    direct = 1.0 / (1.0 + np.exp(np.linalg.norm(z - zm, axis=1) - np.linalg.norm(z - zp, axis=1))) ** 2
    disc_err = float(np.abs(discrimination(zp, zm, z).data - direct).max())
    ok = gae_err < 1e-10 and recon_err < 1e-9 and disc_err < 1e-12
    criterion(8, "GAE, uniform-decoder and discrimination oracles", ok,
              f"gae {gae_err:.1e}; recon {recon_err:.1e}; disc {disc_err:.1e}")


# -- 9 --------------------------------------------------------------------------

SL_BUDGET = 10_000


def test_criterion_9_weak_strong_protocol(criterion, tmp_path_factory):
    cfg = ExperimentConfig.from_file(builtin_config("sl_sma2c")).with_overrides(
        {"seeds": SEEDS, "train": {"budget_episodes": SL_BUDGET}})
    records = run(cfg, tmp_path_factory.mktemp("sl_sma2c"))
    complete = all(r.status == "complete" for r in records)
    curves = all(len(r.evals("train")) == len(r.evals("test")) == SL_BUDGET // cfg["train"]["eval_every"] + 1
                 for r in records)
    violations = sum(m["hygiene_violations"] for r in records for m in r.metrics if m["kind"] == "eval")
    final = {row["pool"]: row for row in final_points(aggregate(records))}
    strong = final["test"]

    env, pool = cfg.make_env()
    envs = [copy.deepcopy(env) for _ in range(8)]
    baseline = [evaluate_policy(RandomAgent(env.n_actions), envs, pool, "test", cfg["train"]["eval_episodes"],
                                np.random.default_rng([s, 99])).mean_return for s in SEEDS]
    b_mean, b_half, _ = mean_ci(baseline)
    ok = complete and curves and violations == 0 and strong["ci_lo"] > b_mean + b_half
    criterion(9, "speaker-listener weak/strong protocol", ok,
              f"{SL_BUDGET} episodes/seed; violations {violations}; strong {strong['mean']:.2f} "
              f"[{strong['ci_lo']:.2f}, {strong['ci_hi']:.2f}] vs random {b_mean:.2f} "
              f"[{b_mean - b_half:.2f}, {b_mean + b_half:.2f}]; weak {final['train']['mean']:.2f}")
