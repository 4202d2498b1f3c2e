"""Adam and global-norm gradient clipping."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import GradError, Tensor


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: dict,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place bias-corrected Adam update on raw arrays.

    ``state`` holds ``t`` and lists ``m``/``v``; it is initialised on first use.
    """
    if len(params) != len(grads):
        raise GradError(f"{len(params)} params but {len(grads)} grads")
    if "m" not in state:
        state["t"] = 0
        state["m"] = [np.zeros_like(p) for p in params]
        state["v"] = [np.zeros_like(p) for p in params]
    if len(state["m"]) != len(params):
        raise GradError("optimizer state does not match parameter list")
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        if p.shape != g.shape or m.shape != p.shape:
            raise GradError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``; returns the raw norm."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm is not None and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            g *= scale
    return total


class Adam:
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 3e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        max_grad_norm: float | None = 0.5,
    ):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.state: dict = {}

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> float:
        """Apply one update from the accumulated ``.grad`` fields; returns the pre-clip norm."""
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in self.params]
        norm = clip_grad_norm(grads, self.max_grad_norm)
        adam_step([p.data for p in self.params], grads, self.state, self.lr, *self.betas, self.eps)
        return norm

    def state_dict(self) -> dict:
        if "m" not in self.state:
            return {"t": 0}
        return {"t": self.state["t"], "m": [m.copy() for m in self.state["m"]], "v": [v.copy() for v in self.state["v"]]}

    def load_state_dict(self, state: dict) -> None:
        if not state or state.get("t", 0) == 0 or "m" not in state:
            self.state = {}
            return
        self.state = {
            "t": int(state["t"]),
            "m": [np.asarray(m, dtype=np.float64).reshape(p.shape) for m, p in zip(state["m"], self.params)],
            "v": [np.asarray(v, dtype=np.float64).reshape(p.shape) for v, p in zip(state["v"], self.params)],
        }
