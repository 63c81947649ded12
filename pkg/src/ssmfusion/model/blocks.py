"""The classifier architecture: gated scan blocks, fusion, stacked modules.

Every block maps (H, W, C) to (H, W, C). The gated two-branch shape is
shared: branch one is Linear -> DWConv -> SiLU -> <scan core> -> LayerNorm,
branch two gates it with SiLU(Linear(X)) by elementwise product, and a
final Linear projects the product.
"""

from __future__ import annotations


from ..numerics import (
    ShapeError,
    Tensor,
    add,
    concat,
    cross_entropy_logits,
    depthwise_conv2d,
    interpolate_up2,
    layer_norm,
    linear,
    mul,
    silu,
    tmean,
)
from ..scanroutes import (
    CANONICAL_ROUTES,
    RouteId,
    beta,
    sigma,
    spectral_flatten,
    spectral_unflatten,
)
from ..ssm import fus_ssm, ssm_self, ssm_self_batched
from .config import ModelConfig
from .weights import ssm_params_at

LN_EPS = 1e-5


def _lin(x, w, pfx):
    return linear(x, w[pfx + ".W"], w.get(pfx + ".b"))


def _dw(x, w, pfx, stride=1):
    return depthwise_conv2d(x, w[pfx + ".k"], stride=stride, bias=w[pfx + ".b"])


def _ln(x, w, pfx):
    return layer_norm(x, w[pfx + ".gamma"], w[pfx + ".beta"], eps=LN_EPS)


def active_routes(cfg: ModelConfig) -> tuple[RouteId, ...]:
    return CANONICAL_ROUTES[: cfg.routes]


def mspa_ssm(X, w, pfx: str, cfg: ModelConfig) -> Tensor:
    """Multi-scale spatial scan: full-resolution routes on the stride-1 map,
    the remaining `down_paths` routes on the stride-2 map, merged by
    upsampling the downsampled sum back to (H, W)."""
    H, W, _ = X.shape
    Z1 = _dw(X, w, pfx + ".dw_s1", stride=1)
    Z2 = _dw(X, w, pfx + ".dw_s2", stride=2) if cfg.down_paths > 0 else None

    routes = active_routes(cfg)
    n_full = cfg.routes - cfg.down_paths
    full_sum = None
    down_sum = None
    for i, route in enumerate(routes):
        Z = Z1 if i < n_full else Z2
        h, ww = Z.shape[0], Z.shape[1]
        params = ssm_params_at(w, f"{pfx}.route{0 if cfg.share_route_params else i}")
        y = ssm_self(sigma(Z, route), params)
        zp = beta(y, route, h, ww)
        if i < n_full:
            full_sum = zp if full_sum is None else add(full_sum, zp)
        else:
            down_sum = zp if down_sum is None else add(down_sum, zp)

    if down_sum is not None:
        up = interpolate_up2(down_sum, (H, W), mode=cfg.interp)
        return up if full_sum is None else add(full_sum, up)
    return full_sum


def mspa_mamba_block(X, w, pfx: str, cfg: ModelConfig) -> Tensor:
    x1 = silu(_dw(_lin(X, w, pfx + ".lin_in"), w, pfx + ".dw"))
    x1 = _ln(mspa_ssm(x1, w, pfx, cfg), w, pfx + ".ln")
    x2 = silu(_lin(X, w, pfx + ".lin_gate"))
    return _lin(mul(x1, x2), w, pfx + ".lin_out")


def spe_ssm(X, w, pfx: str) -> Tensor:
    """Spectral scan: each pixel's channel vector is one sequence, scanned
    forward and reverse with shared width-1 kernels, directions summed."""
    H, W, _ = X.shape
    fwd = ssm_self_batched(spectral_flatten(X, "forward"), ssm_params_at(w, pfx + ".dir0"))
    rev = ssm_self_batched(spectral_flatten(X, "reverse"), ssm_params_at(w, pfx + ".dir1"))
    return add(
        spectral_unflatten(fwd, H, W, "forward"),
        spectral_unflatten(rev, H, W, "reverse"),
    )


def spe_mamba_block(X, w, pfx: str) -> Tensor:
    x1 = silu(_dw(_lin(X, w, pfx + ".lin_in"), w, pfx + ".dw"))
    x1 = _ln(spe_ssm(x1, w, pfx), w, pfx + ".ln")
    x2 = silu(_lin(X, w, pfx + ".lin_gate"))
    return _lin(mul(x1, x2), w, pfx + ".lin_out")


def fus_mamba_block(F_h, F_x, w, pfx: str):
    """Cross-modal block: each modality's sequence is scanned with B, C and
    timescale generated from the other modality."""
    if F_h.shape != F_x.shape:
        raise ShapeError(f"fus_mamba_block: shapes differ {F_h.shape} vs {F_x.shape}")
    H, W, _ = F_h.shape

    t_h = silu(_dw(_lin(F_h, w, pfx + ".lin_in_h"), w, pfx + ".dw_h"))
    t_x = silu(_dw(_lin(F_x, w, pfx + ".lin_in_x"), w, pfx + ".dw_x"))
    gate_h = silu(_lin(F_h, w, pfx + ".lin_gate_h"))
    gate_x = silu(_lin(F_x, w, pfx + ".lin_gate_x"))

    seq_h = sigma(t_h, RouteId.ROW_FORWARD)
    seq_x = sigma(t_x, RouteId.ROW_FORWARD)
    s_ho, s_xo = fus_ssm(
        seq_h, seq_x, ssm_params_at(w, pfx + ".ssm_h"), ssm_params_at(w, pfx + ".ssm_x")
    )
    y_h = _ln(beta(s_ho, RouteId.ROW_FORWARD, H, W), w, pfx + ".ln_h")
    y_x = _ln(beta(s_xo, RouteId.ROW_FORWARD, H, W), w, pfx + ".ln_x")
    out_h = _lin(mul(y_h, gate_h), w, pfx + ".lin_out_h")
    out_x = _lin(mul(y_x, gate_x), w, pfx + ".lin_out_x")
    return out_h, out_x


def ss_mamba_module(H_in, X_in, w, pfx: str, cfg: ModelConfig):
    """One spatial-spectral module: spatial blocks on both streams, the
    spectral block on the HSI stream only, then cross-modal fusion."""
    F_h = mspa_mamba_block(H_in, w, pfx + ".mspa_h", cfg)
    if cfg.use_spectral:
        F_h = spe_mamba_block(F_h, w, pfx + ".spe")
    F_x = mspa_mamba_block(X_in, w, pfx + ".mspa_x", cfg)
    if cfg.use_fusion:
        F_h, F_x = fus_mamba_block(F_h, F_x, w, pfx + ".fus")
    return F_h, F_x


def forward(hsi_patch, aux_patch, w, cfg: ModelConfig) -> Tensor:
    """Patch pair to raw class logits (softmax lives in the loss)."""
    hsi_patch = hsi_patch if isinstance(hsi_patch, Tensor) else Tensor(hsi_patch)
    aux_patch = aux_patch if isinstance(aux_patch, Tensor) else Tensor(aux_patch)
    ps = cfg.patch
    if hsi_patch.shape != (ps, ps, cfg.N_p):
        raise ShapeError(
            f"forward: hsi patch {hsi_patch.shape} != ({ps}, {ps}, {cfg.N_p})"
        )
    if aux_patch.shape != (ps, ps, cfg.aux_channels):
        raise ShapeError(
            f"forward: aux patch {aux_patch.shape} != ({ps}, {ps}, {cfg.aux_channels})"
        )
    F_h = _lin(hsi_patch, w, "stem_h")
    F_x = _lin(aux_patch, w, "stem_x")
    for i in range(cfg.L):
        F_h, F_x = ss_mamba_module(F_h, F_x, w, f"module{i}", cfg)
    pooled = concat([tmean(F_h, axis=(0, 1)), tmean(F_x, axis=(0, 1))])
    hidden = silu(_lin(pooled, w, "head.fc1"))
    return _lin(hidden, w, "head.fc2")


def loss_and_logits(hsi_patch, aux_patch, label: int, w, cfg: ModelConfig):
    logits = forward(hsi_patch, aux_patch, w, cfg)
    return cross_entropy_logits(logits, int(label)), logits
