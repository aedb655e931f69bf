"""Minimal numpy reverse-mode autodiff engine, Adam and a gradient checker."""

from . import ops
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check, relative_error
from .optim import Adam
from .tensor import Parameter, Tensor, as_tensor, is_recording, no_grad

__all__ = [
    "Adam", "GradCheckReport", "Parameter", "Tensor", "as_tensor", "grad_check",
    "is_recording", "load_checkpoint", "no_grad", "ops", "relative_error", "save_checkpoint",
]
