"""The full finite-difference verification suite, shared by CLI and tests.

Each entry checks one differentiable surface against central differences:
the primitive ops on repeated random inputs, the scan kernels with respect
to every input and weight, and the whole classifier end-to-end on a small
configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numerics as nm
from .. import ssm
from ..model import ModelConfig, init_weights, loss_and_logits
from ..numerics import Tensor, grad_check

N_RANDOM_INPUTS = 20
PRIMITIVE_TOL = 1e-4
END_TO_END_TOL = 1e-3


@dataclass
class SuiteEntry:
    name: str
    passed: bool
    max_rel_err: float
    tol: float

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"gradcheck name={self.name} status={status} "
            f"max_rel_err={self.max_rel_err:.3e} tol={self.tol:.0e}"
        )


def _many(name, build, n=N_RANDOM_INPUTS, tol=PRIMITIVE_TOL) -> SuiteEntry:
    worst = 0.0
    ok = True
    for s in range(n):
        f, leaves = build(np.random.default_rng(s))
        rep = grad_check(f, leaves, tol=tol)
        worst = max(worst, rep.max_rel_err)
        ok = ok and rep.passed
    return SuiteEntry(name, ok, worst, tol)


def _t(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _check_linear(rng):
    x, W, b = _t(rng, 3, 5), _t(rng, 5, 2), _t(rng, 2)
    return lambda: nm.tsum(nm.linear(x, W, b)), [x, W, b]


def _check_dwconv_s1(rng):
    x, k, b = _t(rng, 5, 6, 3), _t(rng, 3, 3, 3), _t(rng, 3)
    return lambda: nm.tsum(nm.silu(nm.depthwise_conv2d(x, k, 1, b))), [x, k, b]


def _check_dwconv_s2(rng):
    x, k = _t(rng, 5, 5, 2), _t(rng, 3, 3, 2)
    return lambda: nm.tsum(nm.depthwise_conv2d(x, k, 2)), [x, k]


def _check_silu(rng):
    x = _t(rng, 4, 3)
    return lambda: nm.tsum(nm.silu(x)), [x]


def _check_softplus(rng):
    x = _t(rng, 4, 3, scale=3.0)
    return lambda: nm.tsum(nm.softplus(x)), [x]


def _check_layer_norm(rng):
    x, g, b = _t(rng, 3, 4), _t(rng, 4), _t(rng, 4)
    return lambda: nm.tsum(nm.layer_norm(x, g, b)), [x, g, b]


def _check_interp(rng):
    x = _t(rng, 3, 4, 2)
    return lambda: nm.tsum(nm.interpolate_up2(x, (7, 9))), [x]


def _check_elementwise(rng):
    a, b = _t(rng, 4, 3), _t(rng, 3)
    return lambda: nm.tsum(nm.mul(nm.add(a, b), nm.exp(nm.neg(b)))), [a, b]


def _check_movement(rng):
    x = _t(rng, 3, 4)
    perm = np.random.default_rng(0).permutation(3).astype(np.intp)

    def f():
        a = nm.tsum(nm.silu(nm.take_perm(x, perm)))
        b = nm.tsum(nm.exp(nm.transpose(x, (1, 0))))
        c = nm.tsum(nm.silu(nm.reshape(nm.broadcast_to(x, (2, 3, 4)), (6, 4))))
        return nm.add(nm.add(a, b), c)

    return f, [x]


def _check_fused_scales(rng):
    delta = Tensor(rng.uniform(0.1, 1.0, (4, 3)), requires_grad=True)
    A = _t(rng, 3, 2, scale=0.5)
    A1 = _t(rng, 1, 2, scale=0.5)
    B = _t(rng, 4, 2)
    s = _t(rng, 4, 3)
    wv = _t(rng, 2)

    def f():
        a = nm.tsum(nm.zoh_abar(delta, A))
        a1 = nm.tsum(nm.zoh_abar(delta, A1))
        b = nm.tsum(nm.scale_outer(delta, B))
        c = nm.tsum(nm.scale_states(s, wv))
        return nm.add(nm.add(a, b), nm.add(c, a1))

    return f, [delta, A, A1, B, s, wv]


def _check_reduction(rng):
    x = _t(rng, 3, 4, 2)
    return (
        lambda: nm.tsum(nm.concat([nm.tmean(x, axis=(0, 1)), nm.tsum(x, axis=(0, 1))])),
        [x],
    )


def _check_cross_entropy(rng):
    x = _t(rng, 5, scale=2.0)
    return lambda: nm.cross_entropy_logits(x, 2), [x]


def _check_scan(rng):
    P, C, N = 5, 3, 2
    A = Tensor(-np.exp(rng.standard_normal((P, C, N))), requires_grad=True)
    B = _t(rng, P, C, N)
    Cm = _t(rng, P, C, N)
    D = _t(rng, C)
    x = _t(rng, P, C)
    return (
        lambda: nm.tsum(nm.selective_scan(nm.exp(A), B, Cm, D, x)),
        [A, B, Cm, D, x],
    )


def _check_scan_chunked(rng):
    P, C, N = 7, 2, 2
    A = _t(rng, P, C, N, scale=0.4)
    B = _t(rng, P, C, N)
    Cm = _t(rng, P, C, N)
    D = _t(rng, C)
    x = _t(rng, P, C)
    return (
        lambda: nm.tsum(nm.selective_scan(nm.exp(A), B, Cm, D, x, chunk=3)),
        [A, B, Cm, D, x],
    )


def _make_ssm_params(rng, width, states, requires_grad=True) -> ssm.SsmParams:
    def t(arr):
        return Tensor(arr, requires_grad=requires_grad)

    return ssm.SsmParams(
        A=t(-rng.uniform(0.5, 3.0, (width, states))),
        D=t(np.ones(width)),
        W_B=t(rng.standard_normal((width, states)) * 0.5),
        W_C=t(rng.standard_normal((width, states)) * 0.5),
        W_delta=t(rng.standard_normal((width, width)) * 0.5),
        b_delta=t(rng.standard_normal(width) * 0.1),
    )


def _check_ssm_self(rng):
    params = _make_ssm_params(rng, 3, 4)
    seq = _t(rng, 6, 3)
    leaves = [seq] + list(params.tensors().values())
    return lambda: nm.tsum(ssm.ssm_self(seq, params)), leaves


def _check_ssm_self_batched(rng):
    params = _make_ssm_params(rng, 1, 4)
    seqs = _t(rng, 5, 6)
    leaves = [seqs] + list(params.tensors().values())
    return lambda: nm.tsum(ssm.ssm_self_batched(seqs, params)), leaves


def _check_fus_ssm(rng):
    params_h = _make_ssm_params(rng, 3, 4)
    params_x = _make_ssm_params(rng, 3, 4)
    F_h = _t(rng, 6, 3)
    F_x = _t(rng, 6, 3)
    leaves = (
        [F_h, F_x]
        + list(params_h.tensors().values())
        + list(params_x.tensors().values())
    )

    def f():
        a, b = ssm.fus_ssm(F_h, F_x, params_h, params_x)
        return nm.tsum(nm.add(a, b))

    return f, leaves


def end_to_end_entry() -> SuiteEntry:
    """Cross-entropy through the full model on a 4x4 patch, C=4, N=4, L=1."""
    cfg = ModelConfig(
        L=1, N_p=4, N=4, C=4, patch=4, routes=4, down_paths=2,
        aux_channels=2, classes=3,
    ).validate()
    weights = init_weights(cfg, seed=7, dtype=np.float64)
    rng = np.random.default_rng(11)
    hsi = rng.standard_normal((4, 4, 4))
    aux = rng.standard_normal((4, 4, 2))

    def f():
        loss, _ = loss_and_logits(hsi, aux, 1, weights, cfg)
        return loss

    rep = grad_check(f, list(weights.values()), tol=END_TO_END_TOL)
    return SuiteEntry("end_to_end_forward", rep.passed, rep.max_rel_err, END_TO_END_TOL)


PRIMITIVE_CHECKS = [
    ("linear", _check_linear),
    ("depthwise_conv2d_s1", _check_dwconv_s1),
    ("depthwise_conv2d_s2", _check_dwconv_s2),
    ("silu", _check_silu),
    ("softplus", _check_softplus),
    ("layer_norm", _check_layer_norm),
    ("interpolate_up2", _check_interp),
    ("elementwise", _check_elementwise),
    ("movement", _check_movement),
    ("fused_scales", _check_fused_scales),
    ("reduction", _check_reduction),
    ("cross_entropy", _check_cross_entropy),
    ("selective_scan", _check_scan),
    ("selective_scan_chunked", _check_scan_chunked),
]

KERNEL_CHECKS = [
    ("ssm_self", _check_ssm_self),
    ("ssm_self_batched", _check_ssm_self_batched),
    ("fus_ssm", _check_fus_ssm),
]


def run_suite(include_end_to_end: bool = True, emit=None) -> list:
    """Run every check; returns the SuiteEntry list (all must pass)."""
    entries = []

    def push(entry):
        entries.append(entry)
        if emit is not None:
            emit(entry.line())

    for name, build in PRIMITIVE_CHECKS:
        push(_many(name, build))
    for name, build in KERNEL_CHECKS:
        push(_many(name, build, n=5))
    if include_end_to_end:
        push(end_to_end_entry())
    return entries


def suite_passed(entries) -> bool:
    return all(e.passed for e in entries)
