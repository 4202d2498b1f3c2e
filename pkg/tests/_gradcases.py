"""Random finite-difference cases for every differentiable primitive.

Each factory takes an rng and returns ``(fn, tensors)`` where ``fn()`` builds
a scalar from ``tensors``. Inputs are kept away from kinks (relu, clip, norm
at zero) and outside invalid domains (log, sqrt).
"""
from __future__ import annotations

import numpy as np

from opvae import grad as G
from opvae.grad import Tensor
from opvae.vae.losses import discrimination
from opvae.vae.model import RecurrentEncoder


def _t(rng, *shape, low=-1.0, high=1.0):
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _away_from(rng, shape, points, margin=0.05):
    x = rng.uniform(-1.5, 1.5, size=shape)
    for p in points:
        close = np.abs(x - p) < margin
        x[close] = p + np.sign(x[close] - p + 1e-12) * margin * 2
    return Tensor(x, requires_grad=True)


def _weights(rng, shape):
    # a fixed random projection turns any output into a scalar with nontrivial gradients
    return rng.standard_normal(shape)


def _unary(op, **kw):
    def make(rng):
        x = kw.get("make", lambda r: _t(r, 3, 4))(rng)
        w = _weights(rng, x.shape)
        return (lambda: (op(x) * w).sum()), [x]
    return make


def _binary(op, positive_b=False):
    def make(rng):
        a = _t(rng, 3, 4)
        b = _t(rng, 3, 4, low=0.5, high=2.0) if positive_b else _t(rng, 3, 4)
        w = _weights(rng, (3, 4))
        return (lambda: (op(a, b) * w).sum()), [a, b]
    return make


def _broadcast_add(rng):
    a, b = _t(rng, 3, 4), _t(rng, 4)
    w = _weights(rng, (3, 4))
    return (lambda: ((a + b) * w).sum()), [a, b]


def _matmul(rng):
    a, b = _t(rng, 3, 4), _t(rng, 4, 2)
    w = _weights(rng, (3, 2))
    return (lambda: ((a @ b) * w).sum()), [a, b]


def _sum_axis(rng):
    x = _t(rng, 3, 4)
    w = _weights(rng, (4,))
    return (lambda: (G.tsum(x, axis=0) * w).sum()), [x]


def _mean(rng):
    x = _t(rng, 3, 4)
    w = _weights(rng, (3,))
    return (lambda: (G.mean(x, axis=1) * w).sum()), [x]


def _transpose(rng):
    x = _t(rng, 3, 4)
    w = _weights(rng, (4, 3))
    return (lambda: (G.transpose(x) * w).sum()), [x]


def _reshape(rng):
    x = _t(rng, 3, 4)
    w = _weights(rng, (2, 6))
    return (lambda: (G.reshape(x, (2, 6)) * w).sum()), [x]


def _getitem(rng):
    x = _t(rng, 4, 5)
    idx = rng.integers(4, size=6)
    w = _weights(rng, (6, 3))
    return (lambda: (x[idx, 1:4] * w).sum()), [x]


def _concat(rng):
    a, b = _t(rng, 3, 2), _t(rng, 3, 4)
    w = _weights(rng, (3, 6))
    return (lambda: (G.concat([a, b], axis=-1) * w).sum()), [a, b]


def _stack(rng):
    a, b = _t(rng, 3), _t(rng, 3)
    w = _weights(rng, (2, 3))
    return (lambda: (G.stack([a, b]) * w).sum()), [a, b]


def _norm(rng):
    x = Tensor(rng.uniform(0.3, 1.0, size=(3, 4)) * rng.choice([-1, 1], size=(3, 4)), requires_grad=True)
    w = _weights(rng, (3,))
    return (lambda: (G.norm(x) * w).sum()), [x]


def _log_softmax(rng):
    x = _t(rng, 3, 5, low=-3, high=3)
    w = _weights(rng, (3, 5))
    return (lambda: (G.log_softmax(x) * w).sum()), [x]


def _softmax(rng):
    x = _t(rng, 3, 5, low=-3, high=3)
    w = _weights(rng, (3, 5))
    return (lambda: (G.softmax(x) * w).sum()), [x]


def _dense(rng):
    layer = G.Dense(4, 3, rng)
    layer.bias.data = rng.standard_normal(3)
    x = _t(rng, 2, 4)
    w = _weights(rng, (2, 3))
    return (lambda: (layer(x) * w).sum()), [x, layer.weight, layer.bias]


def _mlp_softmax(rng):
    net = G.MLP([4, 6, 3], rng, activation="tanh")
    x = _t(rng, 2, 4)
    w = _weights(rng, (2, 3))
    return (lambda: (G.softmax(net(x)) * w).sum()), [x, *net.parameters()]


def _gru_step(rng):
    cell = G.GRUCell(3, 4, rng)
    cell.b_in.data = rng.standard_normal(12) * 0.5
    cell.b_h.data = rng.standard_normal(12) * 0.5
    x, h = _t(rng, 2, 3), _t(rng, 2, 4)
    w = _weights(rng, (2, 4))
    return (lambda: (cell(x, h) * w).sum()), [x, h, cell.w_in, cell.w_h, cell.b_in, cell.b_h]


def _reparam(rng):
    m, ls = _t(rng, 2, 3), _t(rng, 2, 3)
    noise = rng.standard_normal((2, 3))
    w = _weights(rng, (2, 3))
    return (lambda: (G.reparam_sample(G.DiagGaussianParams(m, ls), noise) * w).sum()), [m, ls]


def _kl(rng):
    m, ls = _t(rng, 2, 3), _t(rng, 2, 3)
    return (lambda: G.kl_to_standard_normal(G.DiagGaussianParams(m, ls))), [m, ls]


def _discrimination(rng):
    zp, zm, z = _t(rng, 3, 4), _t(rng, 3, 4), _t(rng, 3, 4)
    return (lambda: discrimination(zp, zm, z).sum()), [zp, zm, z]


PRIMITIVES = {
    "add": _binary(lambda a, b: a + b),
    "add_broadcast": _broadcast_add,
    "sub": _binary(lambda a, b: a - b),
    "mul": _binary(lambda a, b: a * b),
    "div": _binary(lambda a, b: a / b, positive_b=True),
    "neg": _unary(lambda x: -x),
    "power": _unary(lambda x: G.power(x, 3.0)),
    "exp": _unary(G.exp),
    "log": _unary(G.log, make=lambda r: _t(r, 3, 4, low=0.2, high=2.0)),
    "sqrt": _unary(G.sqrt, make=lambda r: _t(r, 3, 4, low=0.2, high=2.0)),
    "tanh": _unary(G.tanh),
    "sigmoid": _unary(G.sigmoid, make=lambda r: _t(r, 3, 4, low=-4, high=4)),
    "relu": _unary(G.relu, make=lambda r: _away_from(r, (3, 4), [0.0])),
    "softplus": _unary(G.softplus, make=lambda r: _t(r, 3, 4, low=-4, high=4)),
    "clip": _unary(lambda x: G.clip(x, -0.5, 0.5), make=lambda r: _away_from(r, (3, 4), [-0.5, 0.5])),
    "sum": _sum_axis,
    "mean": _mean,
    "matmul": _matmul,
    "transpose": _transpose,
    "reshape": _reshape,
    "getitem": _getitem,
    "concat": _concat,
    "stack": _stack,
    "norm": _norm,
    "log_softmax": _log_softmax,
    "softmax": _softmax,
    "dense": _dense,
    "mlp_softmax": _mlp_softmax,
    "gru_step": _gru_step,
    "reparam_sample": _reparam,
    "kl_to_standard_normal": _kl,
    "discrimination": _discrimination,
}


def encoder_unroll(rng, steps: int = 25, input_dim: int = 5, hidden: int = 6, latent: int = 3, batch: int = 2):
    """Scalar of all posterior parameters of a ``steps``-long GRU encoder unroll."""
    enc = RecurrentEncoder(input_dim, latent=latent, hidden=hidden, rng=rng)
    inputs = rng.uniform(-1, 1, size=(steps, batch, input_dim))
    wm = rng.standard_normal((steps, batch, latent))
    ws = rng.standard_normal((steps, batch, latent))

    def fn():
        posts = enc(inputs)
        total = None
        for t, p in enumerate(posts.posteriors):
            term = (p.mean * wm[t]).sum() + (p.log_std * ws[t]).sum()
            total = term if total is None else total + term
        return total

    return fn, enc.parameters()
