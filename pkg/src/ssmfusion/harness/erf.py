"""Effective-receptive-field diagnostic.

Measures which input positions the center output activation actually sees:
the gradient of the channel-mean output at the center pixel with respect to
the input patch, reduced to a per-position magnitude map normalized to a
max of 1.
"""

from __future__ import annotations

import numpy as np

from ..model import ModelConfig, init_weights, ss_mamba_module
from ..numerics import Tensor, backward, linear, mul, tsum


def erf_map(forward_fn, patch: np.ndarray) -> np.ndarray:
    """Gradient-support map of forward_fn at the patch center.

    forward_fn maps a Tensor (H, W, C_in) to a Tensor (H, W, C_out); the
    returned array is (H, W), normalized so its maximum is 1 (all zeros if
    the gradient vanishes everywhere).
    """
    x = Tensor(np.asarray(patch, dtype=np.float64), requires_grad=True)
    out = forward_fn(x)
    H, W, C = out.shape
    mask = np.zeros((H, W, C))
    mask[H // 2, W // 2, :] = 1.0 / C
    center_mean = tsum(mul(out, Tensor(mask)))
    grads = backward(center_mean, leaves=[x])
    mag = np.abs(grads[x]).mean(axis=-1)
    peak = mag.max()
    return mag / peak if peak > 0 else mag


def support_fraction(erf: np.ndarray, threshold: float = 1e-6) -> float:
    return float((erf > threshold).mean())


def model_erf_map(weights: dict, cfg: ModelConfig, hsi_patch, aux_patch) -> np.ndarray:
    """ERF of the last module's HSI stream w.r.t. the HSI input patch."""
    aux_t = Tensor(np.asarray(aux_patch, dtype=np.float64))

    def last_module_output(x):
        F_h = linear(x, weights["stem_h.W"])
        F_x = linear(aux_t, weights["stem_x.W"])
        for i in range(cfg.L):
            F_h, F_x = ss_mamba_module(F_h, F_x, weights, f"module{i}", cfg)
        return F_h

    return erf_map(last_module_output, hsi_patch)


def random_model_erf(cfg: ModelConfig, seed: int = 0) -> np.ndarray:
    """ERF of a randomly initialized model on a random input patch."""
    rng = np.random.default_rng(seed)
    weights = init_weights(cfg, seed=seed, dtype=np.float64)
    hsi = rng.standard_normal((cfg.patch, cfg.patch, cfg.N_p))
    aux = rng.standard_normal((cfg.patch, cfg.patch, cfg.aux_channels))
    return model_erf_map(weights, cfg, hsi, aux)
