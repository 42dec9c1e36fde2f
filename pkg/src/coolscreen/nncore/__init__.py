"""Minimal dense numeric core: tape autodiff, layers, losses, optimizers."""

import zlib

import numpy as np

from .gradcheck import grad_check
from .layers import MLP, Linear, Module, xavier_uniform
from .optim import Adam, AdamW, OptimizerState, adam_step, adamw_step
from .tensor import (
    NonFiniteError,
    ShapeMismatch,
    StaleTape,
    Tape,
    Tensor,
    add,
    affine,
    as_tensor,
    concat,
    l2_sq,
    leaky_relu,
    matmul,
    mean_all,
    mse,
    mul,
    parameter,
    repeat_rows,
    scale,
    spmm,
    sub,
    sum_all,
    sum_sq,
    take_rows,
    weighted_sum,
)
from .weights import WeightFormatError, load_weights, save_weights, weights_hash


def make_rng(seed, *stream):
    """Independent generator for a named stream under one seed.

    Different stream names never share state, so adding a consumer (say,
    transfer networks) leaves every other stream's draws unchanged.
    """
    keys = [int(seed)] + [zlib.crc32(str(s).encode("utf-8")) for s in stream]
    return np.random.default_rng(np.random.SeedSequence(keys))


__all__ = [
    "Adam",
    "AdamW",
    "Linear",
    "MLP",
    "Module",
    "NonFiniteError",
    "OptimizerState",
    "ShapeMismatch",
    "StaleTape",
    "Tape",
    "Tensor",
    "WeightFormatError",
    "adam_step",
    "adamw_step",
    "add",
    "affine",
    "as_tensor",
    "concat",
    "grad_check",
    "l2_sq",
    "leaky_relu",
    "load_weights",
    "make_rng",
    "matmul",
    "mean_all",
    "mse",
    "mul",
    "parameter",
    "repeat_rows",
    "save_weights",
    "scale",
    "spmm",
    "sub",
    "sum_all",
    "sum_sq",
    "take_rows",
    "weighted_sum",
    "weights_hash",
    "xavier_uniform",
]
