"""Dense numeric substrate: tape autograd, primitives, parameters, checks."""

from . import blocks, ops
from .autograd import Tensor, constant, leaf, no_grad
from .gradcheck import GradientCheckReport, gradient_check
from .params import (
    ParamRegistry,
    Parameter,
    load_checkpoint,
    save_checkpoint,
    seeded_init,
)

__all__ = [
    "Tensor", "constant", "leaf", "no_grad", "ops", "blocks",
    "ParamRegistry", "Parameter", "seeded_init",
    "save_checkpoint", "load_checkpoint",
    "gradient_check", "GradientCheckReport",
]
