"""Weight-tree construction, closed-form parameter counting, FLOP estimate.

Weights live in a flat dict keyed by dotted names mirroring the module tree
(e.g. "module0.mspa_h.route2.W_B"); the checkpoint container stores exactly
these names. param_count() is an arithmetic function of the config only —
tests cross-check it against a brute-force walk of an actual weight tree.
"""

from __future__ import annotations

import math

import numpy as np

from ..numerics import Tensor
from ..ssm import SsmParams
from .config import ModelConfig


def _softplus_inverse(u: np.ndarray) -> np.ndarray:
    return np.log(np.expm1(u))


class _Builder:
    def __init__(self, rng: np.random.Generator, dtype):
        self.rng = rng
        self.dtype = dtype
        self.out: dict[str, Tensor] = {}

    def _add(self, name, arr):
        self.out[name] = Tensor(np.asarray(arr, dtype=self.dtype), requires_grad=True)

    def linear(self, pfx, cin, cout, bias=True):
        self._add(pfx + ".W", self.rng.normal(0.0, 1.0 / math.sqrt(cin), (cin, cout)))
        if bias:
            self._add(pfx + ".b", np.zeros(cout))

    def dwconv(self, pfx, c):
        self._add(pfx + ".k", self.rng.normal(0.0, 1.0 / 3.0, (3, 3, c)))
        self._add(pfx + ".b", np.zeros(c))

    def layernorm(self, pfx, c):
        self._add(pfx + ".gamma", np.ones(c))
        self._add(pfx + ".beta", np.zeros(c))

    def ssm(self, pfx, width, n, a_init):
        if a_init == "deterministic":
            a = -np.tile(np.arange(1, n + 1, dtype=np.float64), (width, 1))
        else:
            a = -self.rng.uniform(1.0, n + 1.0, (width, n))
        self._add(pfx + ".A", a)
        self._add(pfx + ".D", np.ones(width))
        self._add(pfx + ".W_B", self.rng.normal(0.0, 1.0 / math.sqrt(width), (width, n)))
        self._add(pfx + ".W_C", self.rng.normal(0.0, 1.0 / math.sqrt(width), (width, n)))
        self._add(
            pfx + ".W_delta",
            self.rng.normal(0.0, 1.0 / math.sqrt(width), (width, width)),
        )
        self._add(pfx + ".b_delta", _softplus_inverse(self.rng.uniform(1e-3, 1e-1, width)))


def _mspa_names(b: _Builder, pfx: str, cfg: ModelConfig):
    c, n = cfg.C, cfg.N
    b.linear(pfx + ".lin_in", c, c)
    b.dwconv(pfx + ".dw", c)
    b.linear(pfx + ".lin_gate", c, c)
    b.linear(pfx + ".lin_out", c, c)
    b.layernorm(pfx + ".ln", c)
    b.dwconv(pfx + ".dw_s1", c)
    if cfg.down_paths > 0:
        b.dwconv(pfx + ".dw_s2", c)
    n_route_sets = 1 if cfg.share_route_params else cfg.routes
    for r in range(n_route_sets):
        b.ssm(f"{pfx}.route{r}", c, n, cfg.a_init)


def _spe_names(b: _Builder, pfx: str, cfg: ModelConfig):
    c, n = cfg.C, cfg.N
    b.linear(pfx + ".lin_in", c, c)
    b.dwconv(pfx + ".dw", c)
    b.linear(pfx + ".lin_gate", c, c)
    b.linear(pfx + ".lin_out", c, c)
    b.layernorm(pfx + ".ln", c)
    b.ssm(pfx + ".dir0", 1, n, cfg.a_init)
    b.ssm(pfx + ".dir1", 1, n, cfg.a_init)


def _fus_names(b: _Builder, pfx: str, cfg: ModelConfig):
    c, n = cfg.C, cfg.N
    for m in ("h", "x"):
        b.linear(f"{pfx}.lin_in_{m}", c, c)
        b.dwconv(f"{pfx}.dw_{m}", c)
        b.linear(f"{pfx}.lin_gate_{m}", c, c)
        b.layernorm(f"{pfx}.ln_{m}", c)
        b.linear(f"{pfx}.lin_out_{m}", c, c)
        b.ssm(f"{pfx}.ssm_{m}", c, n, cfg.a_init)


def init_weights(cfg: ModelConfig, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    """Seeded construction of every learnable tensor, in a fixed order."""
    cfg.validate()
    b = _Builder(np.random.default_rng(seed), dtype)
    b.linear("stem_h", cfg.N_p, cfg.C, bias=False)
    b.linear("stem_x", cfg.aux_channels, cfg.C, bias=False)
    for i in range(cfg.L):
        _mspa_names(b, f"module{i}.mspa_h", cfg)
        _mspa_names(b, f"module{i}.mspa_x", cfg)
        if cfg.use_spectral:
            _spe_names(b, f"module{i}.spe", cfg)
        if cfg.use_fusion:
            _fus_names(b, f"module{i}.fus", cfg)
    b.linear("head.fc1", 2 * cfg.C, cfg.C)
    b.linear("head.fc2", cfg.C, cfg.classes)
    return b.out


def ssm_params_at(w: dict[str, Tensor], pfx: str) -> SsmParams:
    return SsmParams(
        A=w[pfx + ".A"],
        D=w[pfx + ".D"],
        W_B=w[pfx + ".W_B"],
        W_C=w[pfx + ".W_C"],
        W_delta=w[pfx + ".W_delta"],
        b_delta=w[pfx + ".b_delta"],
    )


def _count_linear(cin, cout, bias=True):
    return cin * cout + (cout if bias else 0)


def _count_ssm(width, n):
    # A + D + W_B + W_C + W_delta + b_delta
    return 3 * width * n + width * width + 2 * width


def param_count(cfg: ModelConfig) -> int:
    """Learnable scalar count as a closed form of the config.

    Per block (hidden width C, states N):
      linear C->C with bias: C^2 + C          (three per gated block)
      depthwise conv:        9C + C
      layer norm:            2C
      SSM parameter set:     3*width*N + width^2 + 2*width
    The spatial blocks hold one width-C SSM set per route (or one shared),
    the spectral block two width-1 sets, the fusion block one width-C set
    per modality. Patch size never appears: no weight is spatial-sized.
    """
    cfg.validate()
    c, n = cfg.C, cfg.N
    lin = _count_linear(c, c)
    dw = 9 * c + c
    ln = 2 * c

    n_route_sets = 1 if cfg.share_route_params else cfg.routes
    mspa = 3 * lin + dw + ln + dw + (dw if cfg.down_paths > 0 else 0)
    mspa += n_route_sets * _count_ssm(c, n)
    spe = 3 * lin + dw + ln + 2 * _count_ssm(1, n)
    fus = 2 * (3 * lin + dw + ln + _count_ssm(c, n))

    total = _count_linear(cfg.N_p, c, bias=False)
    total += _count_linear(cfg.aux_channels, c, bias=False)
    per_module = 2 * mspa
    if cfg.use_spectral:
        per_module += spe
    if cfg.use_fusion:
        per_module += fus
    total += cfg.L * per_module
    total += _count_linear(2 * c, c) + _count_linear(c, cfg.classes)
    return total


def flop_estimate(cfg: ModelConfig) -> int:
    """Forward-pass FLOPs for one patch pair, multiply-accumulate = 2 FLOPs.

    Conventions (documented, not measured): linears and convs count
    2*tokens*fan_in*fan_out; the scan is costed sequentially at 5 FLOPs per
    (step, channel, state) — 3 for the recurrence, 2 for the readout — plus
    3 per element for discretization (exp counted as one FLOP); selection
    adds its two N-projections and the C->C timescale projection;
    elementwise activations count 4 FLOPs per element, layer norm 8,
    interpolation 8 per output element.
    """
    cfg.validate()
    c, n, p = cfg.C, cfg.N, cfg.patch
    hw = p * p
    hw2 = ((p - 1) // 2 + 1) ** 2

    def lin_f(tokens, cin, cout):
        return 2 * tokens * cin * cout

    def dw_f(tokens):
        return 2 * 9 * tokens * c

    def scan_f(steps, width):
        select = lin_f(steps, width, n) * 2 + lin_f(steps, width, width)
        disc = 3 * steps * width * n
        rec = 5 * steps * width * n
        return select + disc + rec + 4 * steps * width  # + softplus/skip terms

    def mspa_f():
        total = lin_f(hw, c, c) * 3 + dw_f(hw) + 8 * hw * c + 4 * hw * c * 2
        total += dw_f(hw)  # stride-1 multi-scale conv
        if cfg.down_paths > 0:
            total += dw_f(hw)  # stride-2 conv (windows over the full map)
            total += 8 * hw * c  # upsample back
        full = cfg.routes - cfg.down_paths
        total += full * scan_f(hw, c) + cfg.down_paths * scan_f(hw2, c)
        return total

    def spe_f():
        total = lin_f(hw, c, c) * 3 + dw_f(hw) + 8 * hw * c + 4 * hw * c * 2
        total += 2 * hw * scan_f(c, 1)  # per-pixel spectral scans, 2 directions
        return total

    def fus_f():
        per = lin_f(hw, c, c) * 3 + dw_f(hw) + 8 * hw * c + 4 * hw * c * 2
        per += scan_f(hw, c)
        return 2 * per

    total = lin_f(hw, cfg.N_p, c) + lin_f(hw, cfg.aux_channels, c)
    per_module = 2 * mspa_f()
    if cfg.use_spectral:
        per_module += spe_f()
    if cfg.use_fusion:
        per_module += fus_f()
    total += cfg.L * per_module
    total += lin_f(1, 2 * c, c) + lin_f(1, c, cfg.classes) + 4 * c
    return total
