"""Minimal dense-tensor numerics with reverse-mode differentiation."""

from .tensor import (
    ConfigError,
    NumericsError,
    ShapeError,
    Tensor,
    as_tensor,
    assert_finite,
    backward,
    grad_enabled,
    no_grad,
)
from .gradcheck import GradCheckReport, grad_check
from .ops import (
    add,
    broadcast_to,
    concat,
    cross_entropy_logits,
    depthwise_conv2d,
    exp,
    interpolate_up2,
    layer_norm,
    linear,
    mul,
    neg,
    reshape,
    scale_outer,
    scale_states,
    selective_scan,
    silu,
    softplus,
    sub,
    take_perm,
    tmean,
    transpose,
    tsum,
    zoh_abar,
)

__all__ = [
    "ConfigError",
    "GradCheckReport",
    "NumericsError",
    "ShapeError",
    "Tensor",
    "add",
    "as_tensor",
    "assert_finite",
    "backward",
    "broadcast_to",
    "concat",
    "cross_entropy_logits",
    "depthwise_conv2d",
    "exp",
    "grad_check",
    "grad_enabled",
    "interpolate_up2",
    "layer_norm",
    "linear",
    "mul",
    "neg",
    "no_grad",
    "reshape",
    "scale_outer",
    "scale_states",
    "selective_scan",
    "silu",
    "softplus",
    "sub",
    "take_perm",
    "tmean",
    "transpose",
    "tsum",
    "zoh_abar",
]
