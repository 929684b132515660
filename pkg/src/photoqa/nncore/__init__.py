"""Reverse-mode differentiable-computation core used by all models."""

from . import tape
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .kernels import BACKEND
from .layers import (
    LstmCellParams,
    dense,
    init_dense,
    lstm_final,
    lstm_run,
    lstm_step,
    masked_softmax_ce,
)
from .optim import NonFiniteGradient, adagrad_step, clip_global_norm, sgd_step
from .params import Param, ParamStore

__all__ = [
    "BACKEND",
    "CheckpointError",
    "GradCheckReport",
    "LstmCellParams",
    "NonFiniteGradient",
    "Param",
    "ParamStore",
    "adagrad_step",
    "clip_global_norm",
    "dense",
    "grad_check",
    "init_dense",
    "load_checkpoint",
    "lstm_final",
    "lstm_run",
    "lstm_step",
    "masked_softmax_ce",
    "save_checkpoint",
    "sgd_step",
    "tape",
]
