"""Tensor algebra, autodiff, layers, losses and optimisation."""
from numerics.tensor import (
    Tensor, as_tensor, concat, get_default_dtype, no_grad, precision,
    set_default_dtype, sigmoid, softmax, log_softmax, stack,
)
from numerics.layers import (
    Embedding, FeedForward, GatedFusion, LayerNorm, Linear, Module,
    MultiHeadAttention, Parameter, linear_forward, multi_head_attention,
    scaled_dot_product_attention,
)
from numerics.losses import cross_entropy
from numerics.optim import AdamW, OptimizerState, adamw_step, clip_grad_norm, learning_rate

__all__ = [
    "Tensor", "as_tensor", "concat", "get_default_dtype", "no_grad", "precision",
    "set_default_dtype", "sigmoid", "softmax", "log_softmax", "stack",
    "Embedding", "FeedForward", "GatedFusion", "LayerNorm", "Linear", "Module",
    "MultiHeadAttention", "Parameter", "linear_forward", "multi_head_attention",
    "scaled_dot_product_attention", "cross_entropy",
    "AdamW", "OptimizerState", "adamw_step", "clip_grad_norm", "learning_rate",
]
