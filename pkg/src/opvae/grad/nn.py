"""Layer primitives: dense layers, MLPs and a GRU cell."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import GradError, Tensor

ACTIVATIONS = {
    "tanh": T.tanh,
    "relu": T.relu,
    "sigmoid": T.sigmoid,
    "identity": lambda x: x,
}


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Module:
    """Container that discovers parameters in attributes, lists and sub-modules."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            yield from _walk(value, f"{prefix}{key}")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            if name not in state:
                raise KeyError(f"missing parameter {name!r} in state")
            value = np.asarray(state[name], dtype=T.DTYPE)
            if value.shape != p.shape:
                raise GradError(f"shape mismatch for {name}: {value.shape} vs {p.shape}")
            p.data = value.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())


def _walk(value, name: str) -> Iterator[tuple[str, Tensor]]:
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(prefix=f"{name}.")
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            yield from _walk(v, f"{name}.{i}")


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, zero: bool = False):
        self.n_in, self.n_out = n_in, n_out
        w = np.zeros((n_in, n_out)) if zero else glorot_uniform(rng, n_in, n_out)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        x = T.as_tensor(x)
        if x.shape[-1] != self.n_in:
            raise GradError(f"Dense expects input width {self.n_in}, got {x.shape[-1]}")
        return x @ self.weight + self.bias


class MLP(Module):
    """Feed-forward stack; the activation is applied between layers, not after the last."""

    def __init__(
        self,
        sizes: list[int],
        rng: np.random.Generator,
        activation: str = "tanh",
        zero_last: bool = False,
    ):
        if len(sizes) < 2:
            raise GradError("MLP needs at least input and output sizes")
        self.sizes = list(sizes)
        self.activation = activation
        n = len(sizes) - 1
        self.layers = [
            Dense(sizes[i], sizes[i + 1], rng, zero=zero_last and i == n - 1) for i in range(n)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        act = ACTIVATIONS[self.activation]
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = act(x)
        return x


class GRUCell(Module):
    """Gated recurrent unit with update gate, reset gate and tanh candidate.

    h' = (1 - u) * n + u * h, where u = sigmoid(x Wu + h Uu + bu),
    r = sigmoid(x Wr + h Ur + br), n = tanh(x Wn + bn + r * (h Un + bhn)).
    Gate blocks are packed column-wise as [reset | update | candidate].
    """

    def __init__(self, n_in: int, n_hidden: int, rng: np.random.Generator, zero: bool = False):
        self.n_in, self.n_hidden = n_in, n_hidden
        H = n_hidden
        if zero:
            w_in = np.zeros((n_in, 3 * H))
            w_h = np.zeros((H, 3 * H))
        else:
            w_in = np.concatenate([glorot_uniform(rng, n_in, H) for _ in range(3)], axis=1)
            # scaled uniform for the recurrent block, variance-matched to 1/H
            limit = np.sqrt(3.0 / H)
            w_h = rng.uniform(-limit, limit, size=(H, 3 * H))
        self.w_in = Tensor(w_in, requires_grad=True)
        self.w_h = Tensor(w_h, requires_grad=True)
        self.b_in = Tensor(np.zeros(3 * H), requires_grad=True)
        self.b_h = Tensor(np.zeros(3 * H), requires_grad=True)

    def initial_state(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.n_hidden)))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        x, h = T.as_tensor(x), T.as_tensor(h)
        if x.shape[-1] != self.n_in:
            raise GradError(f"GRU expects input width {self.n_in}, got {x.shape[-1]}")
        if h.shape[-1] != self.n_hidden:
            raise GradError(f"GRU expects hidden width {self.n_hidden}, got {h.shape[-1]}")
        H = self.n_hidden
        gi = x @ self.w_in + self.b_in
        gh = h @ self.w_h + self.b_h
        r = T.sigmoid(gi[:, :H] + gh[:, :H])
        u = T.sigmoid(gi[:, H : 2 * H] + gh[:, H : 2 * H])
        n = T.tanh(gi[:, 2 * H :] + r * gh[:, 2 * H :])
        return n + u * (h - n)


def gru_step(x, state: Tensor, cell: GRUCell) -> Tensor:
    """One recurrent step on a single vector or a batch of row vectors."""
    x = T.as_tensor(x)
    single = x.data.ndim == 1
    if single:
        x = T.reshape(x, (1, -1))
        state = T.reshape(state, (1, -1))
    out = cell(x, state)
    return T.reshape(out, (-1,)) if single else out
