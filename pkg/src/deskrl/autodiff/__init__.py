"""Minimal reverse-mode autodiff: tensors, shared parameters, optimizers."""

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import (
    GradCheckReport,
    NondeterministicBuilderError,
    collect_grads,
    grad_check,
)
from .optim import OptimizerConfig, clip_by_global_norm, global_norm, optimizer_step
from .params import ParameterStore
from .tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    conv2d_same,
    conv2d_transpose_same,
    default_dtype,
    dense,
    gather_rows,
    log_softmax,
    matmul,
    mul,
    no_grad,
    relu,
    reshape,
    set_check_finite,
    set_default_dtype,
    softmax_and_entropy,
    square,
    test_dtype,
    texp,
    tmean,
    tsum,
)

__all__ = [
    "Tensor", "add", "as_tensor", "backward", "conv2d_same",
    "conv2d_transpose_same", "default_dtype", "dense", "gather_rows",
    "log_softmax", "matmul", "mul", "no_grad", "relu", "reshape",
    "set_check_finite", "set_default_dtype", "softmax_and_entropy", "square",
    "test_dtype", "texp", "tmean", "tsum",
    "ParameterStore", "OptimizerConfig", "optimizer_step", "global_norm",
    "clip_by_global_norm", "grad_check", "collect_grads", "GradCheckReport",
    "NondeterministicBuilderError", "save_checkpoint", "load_checkpoint",
]
