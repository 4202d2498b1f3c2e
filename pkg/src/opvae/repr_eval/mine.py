"""Donsker-Varadhan mutual information estimate between embeddings and opponent identity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import grad as G


class UndefinedMIError(ValueError):
    pass


@dataclass
class MineConfig:
    hidden: tuple = (64, 64)
    epochs: int = 200
    lr: float = 1e-3
    batch_size: int = 256
    train_frac: float = 0.8
    window: int = 10
    max_grad_norm: float | None = None


@dataclass
class MineResult:
    mi_nats: float
    history: list = field(default_factory=list)
    n_train: int = 0
    n_test: int = 0
    n_ids: int = 0


class StatisticNetwork(G.Module):
    """T(z, one-hot id) -> scalar."""

    def __init__(self, z_dim: int, n_ids: int, hidden=(64, 64), rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.n_ids = n_ids
        self.net = G.MLP([z_dim + n_ids, *hidden, 1], rng)

    def __call__(self, z, onehot) -> G.Tensor:
        return G.reshape(self.net(np.concatenate([z, onehot], axis=-1)), (-1,))

    def all_ids(self, z: np.ndarray) -> np.ndarray:
        """T(z_i, m) for every sample i and every identity m, shape (N, M)."""
        n, M = len(z), self.n_ids
        zz = np.repeat(z, M, axis=0)
        ids = np.tile(np.eye(M), (n, 1))
        with G.no_grad():
            return self(zz, ids).data.reshape(n, M)


def dv_bound(t_joint, t_marginal) -> float:
    """E_joint[T] - log E_marginal[exp T] for plain arrays."""
    t_marginal = np.asarray(t_marginal, dtype=float)
    m = t_marginal.max()
    return float(np.mean(t_joint) - (m + np.log(np.mean(np.exp(t_marginal - m)))))


def _dv_loss(T_net: StatisticNetwork, z, onehot, shuffled) -> G.Tensor:
    t_joint = T_net(z, onehot)
    t_marg = T_net(z, shuffled)
    n = t_marg.shape[0]
    # log mean exp, stabilised by a constant shift
    shift = float(t_marg.data.max())
    lme = G.log(G.exp(t_marg - shift).sum() * (1.0 / n)) + shift
    return -(t_joint.mean() - lme)


def heldout_estimate(T_net: StatisticNetwork, z: np.ndarray, ids: np.ndarray, id_probs: np.ndarray) -> float:
    """DV estimate on held-out data; the product of marginals is enumerated
    exactly over identities rather than sampled."""
    scores = T_net.all_ids(z)
    t_joint = scores[np.arange(len(ids)), ids]
    m = scores.max()
    marg = np.mean(np.exp(scores - m) @ id_probs)
    return float(np.mean(t_joint) - (m + np.log(marg)))


def mine_estimate(z, ids, cfg: MineConfig | None = None, rng: np.random.Generator | None = None) -> MineResult:
    """MI(z; id) in nats: the statistic network is fit on a train split with
    in-batch shuffled identities as the marginal; the reported value is the
    maximum trailing moving average of the held-out estimate across epochs."""
    cfg = cfg or MineConfig()
    rng = np.random.default_rng(0) if rng is None else rng
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    labels, ids = np.unique(np.asarray(ids), return_inverse=True)
    if len(labels) < 2:
        raise UndefinedMIError("mutual information with a single identity is undefined")
    M = len(labels)
    onehot = np.eye(M)[ids]
    order = rng.permutation(len(z))
    n_train = int(round(cfg.train_frac * len(z)))
    tr, te = order[:n_train], order[n_train:]
    if len(te) == 0:
        te = tr
    id_probs = np.bincount(ids[tr], minlength=M) / len(tr)
    T_net = StatisticNetwork(z.shape[1], M, cfg.hidden, rng)
    opt = G.Adam(T_net.parameters(), lr=cfg.lr, max_grad_norm=cfg.max_grad_norm)
    history = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(tr)
        for start in range(0, len(perm), cfg.batch_size):
            b = perm[start : start + cfg.batch_size]
            if len(b) < 2:
                continue
            opt.zero_grad()
            loss = _dv_loss(T_net, z[b], onehot[b], onehot[rng.permutation(b)])
            loss.backward()
            opt.step()
        history.append(heldout_estimate(T_net, z[te], ids[te], id_probs))
    h = np.asarray(history)
    w = min(cfg.window, len(h))
    smoothed = np.convolve(h, np.ones(w) / w, mode="valid")
    return MineResult(float(smoothed.max()), history, len(tr), len(te), M)
