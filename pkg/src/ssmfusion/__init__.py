"""Selective-scan state-space kernels, multi-route 2D scanning, and a
dual-input cross-modal fusion SSM classifier for multi-source image patches,
with a training/evaluation harness and verification oracles."""

from .model import ModelConfig, forward, init_weights, param_count
from .numerics import Tensor, backward, grad_check
from .ssm import SsmParams, fus_ssm, scan_chunked, scan_sequential, ssm_self

__version__ = "0.1.0"

__all__ = [
    "ModelConfig",
    "SsmParams",
    "Tensor",
    "backward",
    "forward",
    "fus_ssm",
    "grad_check",
    "init_weights",
    "param_count",
    "scan_chunked",
    "scan_sequential",
    "ssm_self",
    "__version__",
]
