"""Diagonal Gaussian posteriors: reparameterized sampling and KL to N(0, I)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import GradError, Tensor


@dataclass
class DiagGaussianParams:
    mean: Tensor
    log_std: Tensor

    def __post_init__(self):
        self.mean = T.as_tensor(self.mean)
        self.log_std = T.as_tensor(self.log_std)
        if self.mean.shape != self.log_std.shape:
            raise GradError(f"mean {self.mean.shape} and log_std {self.log_std.shape} differ")

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std.data)


def reparam_sample(post: DiagGaussianParams, noise) -> Tensor:
    """mean + exp(log_std) * noise. ``noise`` is data: no gradient reaches it."""
    noise = np.asarray(noise.data if isinstance(noise, Tensor) else noise, dtype=T.DTYPE)
    if noise.shape != post.mean.shape:
        raise GradError(f"noise shape {noise.shape} does not match mean {post.mean.shape}")
    return post.mean + T.exp(post.log_std) * noise


def kl_to_standard_normal(post: DiagGaussianParams, axis=None) -> Tensor:
    """0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma); sums over ``axis`` (all by default)."""
    m, ls = post.mean, post.log_std
    terms = m * m + T.exp(ls * 2.0) - 1.0 - ls * 2.0
    return T.tsum(terms, axis=axis) * 0.5
