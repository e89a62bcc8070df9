from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .layers import MLP, Embedding, Linear, Module, xavier_uniform
from .optim import Adam, AdamState, adam_step
from .tensor import (
    BCE_EPS,
    Tensor,
    add,
    affine,
    as_tensor,
    bce_loss,
    broadcast_to,
    concat,
    embedding_lookup,
    exp,
    is_grad_enabled,
    log,
    masked_softmax,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    softmax,
    stack,
    sub,
    tanh,
    tsum,
)

__all__ = [
    "Adam", "AdamState", "BCE_EPS", "Checkpoint", "Embedding", "Linear", "MLP", "Module",
    "Tensor", "adam_step", "add", "affine", "as_tensor", "bce_loss", "broadcast_to",
    "concat", "embedding_lookup", "exp", "is_grad_enabled", "load_checkpoint", "log",
    "masked_softmax", "matmul", "mean", "mul", "no_grad", "relu", "reshape",
    "save_checkpoint", "sigmoid", "softmax", "stack", "sub", "tanh", "tsum",
    "xavier_uniform",
]
