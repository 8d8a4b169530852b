"""Reverse-mode automatic differentiation over float64 arrays."""
from . import ops
from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .nn import (
    GATE_ORDER,
    Linear,
    LstmCellParams,
    Module,
    MultiHeadSelfAttention,
    lstm_sequence,
    lstm_state_step,
    lstm_step,
)
from .ops import forward_op
from .optim import Adam, AdamState, adam_apply
from .tensor import GradTape, Tensor, as_tensor, backward, current_tape, no_grad, reset_tape

__all__ = [
    "Adam", "AdamState", "GATE_ORDER", "GradTape", "Linear", "LstmCellParams", "Module",
    "MultiHeadSelfAttention", "Tensor", "adam_apply", "as_tensor", "backward", "current_tape",
    "decode_checkpoint", "encode_checkpoint", "forward_op", "load_checkpoint", "lstm_sequence",
    "lstm_state_step", "lstm_step", "no_grad", "ops", "reset_tape", "save_checkpoint",
]
