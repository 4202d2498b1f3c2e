from .tensor import (
    add,
    div,
    getitem,
    mul,
    sub,
    GradError,
    Tensor,
    as_tensor,
    backward,
    clip,
    concat,
    exp,
    log,
    log_softmax,
    matmul,
    mean,
    no_grad,
    neg,
    norm,
    power,
    relu,
    reshape,
    sigmoid,
    softmax,
    softplus,
    sqrt,
    stack,
    tanh,
    transpose,
    tsum,
    zero_grad,
)
from .nn import MLP, Dense, GRUCell, Module, gru_step
from .gaussian import DiagGaussianParams, kl_to_standard_normal, reparam_sample
from .optim import Adam, adam_step, clip_grad_norm
from .checks import gradcheck, numeric_grad
from .checkpoint import FORMAT as CHECKPOINT_FORMAT, load_checkpoint, save_checkpoint

__all__ = [
    "div",
    "mul",
    "sub",
    "add",
    "getitem",
    "numeric_grad",
    "gradcheck",
    "transpose",
    "softplus",
    "power",
    "neg",
    "mean",
    "Adam",
    "CHECKPOINT_FORMAT",
    "Dense",
    "DiagGaussianParams",
    "GRUCell",
    "GradError",
    "MLP",
    "Module",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "clip",
    "clip_grad_norm",
    "concat",
    "exp",
    "gru_step",
    "kl_to_standard_normal",
    "load_checkpoint",
    "log",
    "log_softmax",
    "matmul",
    "no_grad",
    "norm",
    "relu",
    "reparam_sample",
    "reshape",
    "save_checkpoint",
    "sigmoid",
    "softmax",
    "sqrt",
    "stack",
    "tanh",
    "tsum",
    "zero_grad",
]
