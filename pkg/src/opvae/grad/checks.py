"""Central finite-difference gradient checks."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad


def numeric_grad(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    eps: float = 1e-5,
    coords: Sequence[tuple[int, int]] | None = None,
) -> list[tuple[int, int, float]]:
    """d fn / d x by central differences at selected (tensor index, flat index) coordinates."""
    if coords is None:
        coords = [(i, j) for i, t in enumerate(tensors) for j in range(t.size)]
    out = []
    with no_grad():
        for i, j in coords:
            flat = tensors[i].data.reshape(-1)
            orig = flat[j]
            flat[j] = orig + eps
            up = fn().item()
            flat[j] = orig - eps
            down = fn().item()
            flat[j] = orig
            out.append((i, j, (up - down) / (2 * eps)))
    return out


def gradcheck(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    eps: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Norm-wise relative error between analytic and numeric gradients.

    With ``max_coords`` only a random subset of coordinates is probed.
    """
    for t in tensors:
        t.grad = None
        t.requires_grad = True
    fn().backward()
    coords = [(i, j) for i, t in enumerate(tensors) for j in range(t.size)]
    if max_coords is not None and len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        pick = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[k] for k in pick]
    numeric = numeric_grad(fn, tensors, eps, coords)
    a = np.array([0.0 if tensors[i].grad is None else tensors[i].grad.reshape(-1)[j] for i, j, _ in numeric])
    n = np.array([g for _, _, g in numeric])
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)
