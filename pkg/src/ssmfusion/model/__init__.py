"""Classifier architecture: config, PCA front-end, blocks, weight tree."""

from .config import ModelConfig
from .pca import InsufficientDataError, PcaModel, pca_apply, pca_fit
from .weights import (
    flop_estimate,
    init_weights,
    param_count,
    ssm_params_at,
)
from .blocks import (
    active_routes,
    forward,
    fus_mamba_block,
    loss_and_logits,
    mspa_mamba_block,
    mspa_ssm,
    spe_mamba_block,
    spe_ssm,
    ss_mamba_module,
)

__all__ = [
    "InsufficientDataError",
    "ModelConfig",
    "PcaModel",
    "active_routes",
    "flop_estimate",
    "forward",
    "fus_mamba_block",
    "init_weights",
    "loss_and_logits",
    "mspa_mamba_block",
    "mspa_ssm",
    "param_count",
    "pca_apply",
    "pca_fit",
    "spe_mamba_block",
    "spe_ssm",
    "ss_mamba_module",
    "ssm_params_at",
    "ssm_params_at",
]
