"""Minimal differentiable core: tensors, dense networks, Adam, gradient checks."""

from .gradcheck import grad_check
from .mlp import MlpSpec, ParamSet, forward_mlp, init_mlp, make_dropout_masks
from .optim import AdamState, adam_step
from .tensor import (
    DimensionError,
    NumericError,
    Tensor,
    checked_mode,
    gradients,
    set_checked,
)

__all__ = [
    "AdamState",
    "DimensionError",
    "MlpSpec",
    "NumericError",
    "ParamSet",
    "Tensor",
    "adam_step",
    "checked_mode",
    "forward_mlp",
    "grad_check",
    "gradients",
    "init_mlp",
    "make_dropout_masks",
    "set_checked",
]
