import math

import numpy as np
import pytest

from opvae import grad as G
from opvae.envs import ContractError, RepeatedMatrixGame, pd_pool, record_pool, record_trajectories
from opvae.envs.matrix_game import AlwaysDefect, TitForTat
from opvae.envs.trajectory import LocalTrajectory, OpponentTrajectory
from opvae.rl import ActorCritic
from opvae.vae import (
    DataError,
    OpponentModel,
    RecurrentEncoder,
    VAEConfig,
    discrimination,
    encode_opponent,
    encode_self,
    kl_sequence,
    local_inputs,
    om_vae_loss,
    pretrain_om_vae,
    reconstruction_accuracy,
    reconstruction_nll,
    sample_latents,
    self_vae_loss,
)
from opvae.repr_eval import separation_ratio

H = 25


def pd_model(kind="opponent", inputs="full", seed=0, **kw):
    env = RepeatedMatrixGame()
    return env, OpponentModel(kind, env.obs_dim, env.n_actions, env.opp_obs_dim, env.opp_n_actions,
                              inputs=inputs, rng=np.random.default_rng(seed), **kw)


def records(opp, n=4, seed=0):
    return record_trajectories(RepeatedMatrixGame(), opp, None, n, np.random.default_rng(seed))


def graph_leaves(t):
    seen, stack, leaves = set(), [t], []
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        if not x._parents:
            leaves.append(x)
        stack.extend(x._parents)
    return leaves


# -- causality --------------------------------------------------------------

def test_opponent_encoder_truncation_leaves_prefix_unchanged():
    _, model = pd_model()
    rec = records(TitForTat(), 1)[0].tau_opp
    full = encode_opponent(rec, model)
    for t in (1, 7, 24):
        cut = encode_opponent(OpponentTrajectory(rec.obs[:t], rec.actions[:t]), model)
        np.testing.assert_array_equal(cut.means(), full.means()[:t])
        np.testing.assert_array_equal(cut.log_stds(), full.log_stds()[:t])


def test_self_encoder_final_reward_only_changes_final_step():
    _, model = pd_model("self")
    tau = records(TitForTat(), 1)[0].tau
    rewards = tau.rewards.copy()
    rewards[-1] += 2.0
    other = LocalTrajectory(tau.obs, tau.actions, rewards, tau.dones)
    a, b = encode_self(tau, model).means(), encode_self(other, model).means()
    np.testing.assert_array_equal(a[:-1], b[:-1])
    assert np.abs(a[-1] - b[-1]).max() > 0


def test_future_alterations_never_change_the_past():
    _, model = pd_model()
    rec = records(TitForTat(), 1)[0].tau_opp
    actions = rec.actions.copy()
    actions[10:] = 1 - actions[10:]
    a = encode_opponent(rec, model).means()
    b = encode_opponent(OpponentTrajectory(rec.obs, actions), model).means()
    np.testing.assert_array_equal(a[:10], b[:10])


def test_zero_encoder_is_constant():
    enc = RecurrentEncoder(5, latent=3, hidden=4, zero=True)
    posts = enc(np.random.default_rng(0).standard_normal((25, 3, 5)))
    np.testing.assert_array_equal(posts.means(), 0.0)
    np.testing.assert_array_equal(posts.log_stds(), 0.0)


def test_empty_trajectory_rejected():
    _, model = pd_model()
    with pytest.raises(ContractError):
        encode_opponent(OpponentTrajectory(np.zeros((0, 6)), np.zeros(0, int)), model)


# -- local inputs -----------------------------------------------------------

def test_observation_action_mask_drops_reward_and_done():
    tau = records(TitForTat(), 1)[0].tau
    full = local_inputs([tau], 2, "full")
    oa = local_inputs([tau], 2, "obs_action")
    np.testing.assert_array_equal(oa[..., -2:], 0.0)
    np.testing.assert_array_equal(oa[..., :-2], full[..., :-2])
    oo = local_inputs([tau], 2, "obs_only")
    np.testing.assert_array_equal(oo[..., RepeatedMatrixGame().obs_dim:], 0.0)
    np.testing.assert_array_equal(full[:, 0, -2], tau.rewards)
    assert full[-1, 0, -1] == 1.0 and full[:-1, 0, -1].sum() == 0.0


def test_encode_self_reads_no_opponent_fields():
    _, model = pd_model("self")
    rec = records(TitForTat(), 1)[0]

    class Tripwire:
        def __getattr__(self, name):
            raise AssertionError(f"opponent field {name} was read")

    rec.tau_opp = Tripwire()
    encode_self(rec.tau, model)


# -- discrimination ---------------------------------------------------------

def test_discrimination_degenerate_and_limit():
    z = np.array([[0.3, -0.2]])
    assert discrimination(z, z, z).item() == pytest.approx(0.25, abs=1e-15)
    assert discrimination(z, z + 1e3, z).item() < 1e-12


def test_discrimination_worked_example():
    v = discrimination(np.array([[2.0]]), np.array([[1.0]]), np.array([[0.0]])).item()
    assert v == pytest.approx(1.0 / (1.0 + math.exp(-1.0)) ** 2, abs=1e-12)
    assert v == pytest.approx(0.5344466, abs=1e-6)


def test_discrimination_matches_formula_and_stays_in_unit_interval():
    rng = np.random.default_rng(0)
    zp, zm, z = (rng.standard_normal((1000, 4)) * 2 for _ in range(3))
    got = discrimination(zp, zm, z).data
    want = 1.0 / (1.0 + np.exp(np.linalg.norm(z - zm, axis=1) - np.linalg.norm(z - zp, axis=1))) ** 2
    np.testing.assert_allclose(got, want, atol=1e-12)
    assert np.all((got > 0) & (got < 1))


def test_discrimination_shape_mismatch():
    with pytest.raises(ContractError):
        discrimination(np.zeros((1, 3)), np.zeros((1, 2)), np.zeros((1, 3)))


# -- losses ---------------------------------------------------------------

def uniform_decoder(model):
    last = model.decoder.net.layers[-1]
    last.weight.data[:] = 0.0
    last.bias.data[:] = 0.0


def test_uniform_decoder_reconstruction_is_h_ln2():
    _, model = pd_model()
    uniform_decoder(model)
    recs = records(TitForTat(), 3)
    _, parts = om_vae_loss(model, [r.tau_opp for r in recs], beta=0.0, lam=0.0, rng=np.random.default_rng(0))
    assert parts["recon"] == pytest.approx(H * math.log(2), abs=1e-9)
    assert parts["recon"] == pytest.approx(17.3286795, abs=1e-6)
    _, model = pd_model("self")
    uniform_decoder(model)
    _, parts = self_vae_loss(model, [r.tau for r in recs], [r.tau_opp for r in recs], beta=0.0,
                             rng=np.random.default_rng(0))
    assert parts["recon"] == pytest.approx(H * math.log(2), abs=1e-9)


def test_zero_beta_and_lambda_isolates_cross_entropy():
    _, model = pd_model()
    trajs = [r.tau_opp for r in records(AlwaysDefect(), 2)]
    noise = np.random.default_rng(1).standard_normal((H, 2, model.latent))
    loss, parts = om_vae_loss(model, trajs, beta=0.0, lam=0.0, noise=noise)
    posts = encode_opponent(trajs, model)
    obs = np.stack([t.obs for t in trajs], axis=1)
    acts = np.stack([t.actions for t in trajs], axis=1)
    direct = reconstruction_nll(model.decoder, obs, acts, sample_latents(posts.posteriors, noise)).item()
    assert loss.item() == pytest.approx(direct, rel=1e-12)
    assert parts["disc"] == 0.0
    loss_b, _ = om_vae_loss(model, trajs, beta=0.5, lam=0.0, noise=noise)
    assert loss_b.item() == pytest.approx(direct + 0.5 * kl_sequence(posts.posteriors).item(), rel=1e-12)


def test_lambda_adds_discrimination_term():
    _, model = pd_model()
    a, p = [r.tau_opp for r in records(TitForTat(), 2)]
    n = records(AlwaysDefect(), 1)[0].tau_opp
    noise = np.zeros((H, 1, model.latent))
    base, _ = om_vae_loss(model, [a], beta=0.01, lam=0.0, noise=noise)
    loss, parts = om_vae_loss(model, [a], [p], [n], beta=0.01, lam=2.0, noise=noise)
    assert 0 < parts["disc"] < 1
    assert loss.item() == pytest.approx(base.item() + 2.0 * parts["disc"], rel=1e-12)


def test_om_loss_triplet_errors():
    _, model = pd_model()
    trajs = [r.tau_opp for r in records(TitForTat(), 3)]
    with pytest.raises(ContractError):
        om_vae_loss(model, trajs[:2], trajs[:1], trajs[:2], lam=1.0)
    with pytest.raises(ContractError):
        om_vae_loss(model, trajs, lam=1.0)


def test_self_loss_beta_zero_and_misalignment():
    _, model = pd_model("self")
    recs = records(TitForTat(), 2)
    noise = np.random.default_rng(2).standard_normal((H, 2, model.latent))
    loss, parts = self_vae_loss(model, [r.tau for r in recs], [r.tau_opp for r in recs], beta=0.0, noise=noise)
    assert loss.item() == pytest.approx(parts["recon"], rel=1e-12)
    short = OpponentTrajectory(recs[0].tau_opp.obs[:10], recs[0].tau_opp.actions[:10])
    with pytest.raises(ContractError):
        self_vae_loss(model, [recs[0].tau], [short])
    with pytest.raises(ContractError):
        self_vae_loss(model, [r.tau for r in recs], [recs[0].tau_opp])


def test_monte_carlo_variance_scales_inverse_in_samples():
    _, model = pd_model()
    trajs = [r.tau_opp for r in records(TitForTat(), 4)]
    posts = encode_opponent(trajs, model)
    obs = np.stack([t.obs for t in trajs], axis=1)
    acts = np.stack([t.actions for t in trajs], axis=1)
    rng = np.random.default_rng(5)
    with G.no_grad():
        draws = np.array([
            reconstruction_nll(model.decoder, obs, acts,
                               sample_latents(posts.posteriors, rng.standard_normal((H, 4, model.latent)))).item()
            for _ in range(2000)
        ])
    v1 = draws.var(ddof=1)
    assert v1 > 0
    for S in (10, 40):
        v = draws.reshape(-1, S).mean(axis=1).var(ddof=1)
        assert 0.5 < v * S / v1 < 2.0


def test_om_loss_gives_no_gradient_to_policy():
    env, model = pd_model()
    policy = ActorCritic(env.obs_dim + model.latent, env.n_actions, rng=np.random.default_rng(0))
    a, p = [r.tau_opp for r in records(TitForTat(), 2)]
    n = records(AlwaysDefect(), 1)[0].tau_opp
    loss, _ = om_vae_loss(model, [a], [p], [n], rng=np.random.default_rng(0))
    loss.backward()
    assert all(q.grad is None for q in policy.parameters())
    assert any(q.grad is not None and np.abs(q.grad).sum() > 0 for q in model.encoder.parameters())


def test_self_loss_treats_opponent_data_as_constants():
    _, model = pd_model("self")
    recs = records(TitForTat(), 2)
    loss, _ = self_vae_loss(model, [r.tau for r in recs], [r.tau_opp for r in recs], rng=np.random.default_rng(0))
    params = {id(q) for q in model.parameters()}
    trainable = [x for x in graph_leaves(loss) if x.requires_grad]
    assert trainable and all(id(x) in params for x in trainable)
    loss.backward()
    assert any(q.grad is not None for q in model.encoder.parameters())


# -- pretraining ------------------------------------------------------------

@pytest.fixture(scope="module")
def pd_data():
    env = RepeatedMatrixGame()
    pool = pd_pool()
    train = record_pool(env, pool.train, None, 200, np.random.default_rng(0))
    held = record_pool(env, pool.train, None, 50, np.random.default_rng(1))
    return env, pool, train, held


@pytest.fixture(scope="module")
def trained(pd_data):
    env, _, train, _ = pd_data
    return pretrain_om_vae(train, env, VAEConfig(epochs=8), np.random.default_rng(0))


def test_pretrain_predicts_always_defect_perfectly(pd_data, trained):
    _, _, _, held = pd_data
    model, history = trained
    ad = [r for r in held if r.opponent_id == AlwaysDefect.id]
    assert reconstruction_accuracy(model, ad) == 1.0
    assert {"recon", "kl", "disc"} <= set(history[0])


def test_pretrain_reconstruction_decreases_early(trained):
    _, history = trained
    recon = np.array([h["recon"] for h in history[:6]])
    smooth = np.convolve(recon, np.ones(2) / 2, mode="valid")
    assert np.all(np.diff(smooth) < 0)


def test_pretrain_final_means_cluster_by_opponent(pd_data, trained):
    _, _, _, held = pd_data
    model, _ = trained
    z = encode_opponent([r.tau_opp for r in held], model).means()[-1]
    ids = np.array([r.opponent_id for r in held])
    assert separation_ratio(z, ids) > 2.0


def test_discrimination_raises_separation(pd_data, trained):
    env, _, train, held = pd_data
    model, _ = trained
    plain, _ = pretrain_om_vae(train, env, VAEConfig(epochs=8, lam=0.0), np.random.default_rng(0))
    ids = np.array([r.opponent_id for r in held])
    ratio = lambda m: separation_ratio(encode_opponent([r.tau_opp for r in held], m).means()[-1], ids)
    assert ratio(model) > ratio(plain)


def test_large_beta_collapses_posterior(pd_data):
    env, _, train, _ = pd_data
    subset = train[::7]
    model, _ = pretrain_om_vae(subset, env, VAEConfig(epochs=30, batch_size=16, beta=1e3, lam=0.0),
                               np.random.default_rng(0))
    with G.no_grad():
        posts = encode_opponent([r.tau_opp for r in train[1::7]], model)
        kl_per_step = kl_sequence(posts.posteriors).item() / H
    assert kl_per_step < 0.01


def test_pretrain_data_errors(pd_data):
    env, pool, train, _ = pd_data
    only_tft = [r for r in train if r.opponent_id == TitForTat.id][:10]
    with pytest.raises(DataError):
        pretrain_om_vae(only_tft, env, VAEConfig(epochs=1), required_opponents=pool.ids("train"))
    with pytest.raises(DataError):
        pretrain_om_vae(only_tft, env, VAEConfig(epochs=1, lam=1.0))
    with pytest.raises(DataError):
        pretrain_om_vae([], env)
