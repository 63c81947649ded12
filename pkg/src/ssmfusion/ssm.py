"""Discretized selective-scan state-space kernels.

The continuous system h'(t) = A h(t) + B x(t), y = C h + D x is discretized
with a zero-order hold: Abar = exp(delta * A), Bbar ~= delta * B (first-order
approximation of the exact hold). The selection mechanism makes B, C and the
timescale delta functions of a conditioning sequence; the fusion variant
draws them from the *other* modality's sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    ShapeError,
    Tensor,
    add,
    as_tensor,
    assert_finite,
    broadcast_to,
    linear,
    mul,
    reshape,
    scale_outer,
    scale_states,
    selective_scan,
    softplus,
    zoh_abar,
)


class ContractViolation(ValueError):
    """An operation's precondition (e.g. delta > 0) was broken."""


@dataclass
class SsmParams:
    """Per-kernel learnables: state matrix, skip vector, selection weights.

    A: (C, N) diagonal-per-channel state transition (negative at init),
    D: (C,) skip path, W_B / W_C: (C, N) projections producing B and C,
    W_delta: (C, C) with b_delta: (C,) producing the timescale.
    """

    A: Tensor
    D: Tensor
    W_B: Tensor
    W_C: Tensor
    W_delta: Tensor
    b_delta: Tensor

    @property
    def width(self) -> int:
        return self.A.shape[0]

    @property
    def states(self) -> int:
        return self.A.shape[1]

    def tensors(self) -> dict:
        return {
            "A": self.A,
            "D": self.D,
            "W_B": self.W_B,
            "W_C": self.W_C,
            "W_delta": self.W_delta,
            "b_delta": self.b_delta,
        }


@dataclass
class SelectedParams:
    B: Tensor  # (P, N)
    C: Tensor  # (P, N)
    delta: Tensor  # (P, C), strictly positive


@dataclass
class DiscreteParams:
    Abar: Tensor  # (P, C, N), entries in (0, inf)
    Bbar: Tensor  # (P, C, N)


def select(seq, params: SsmParams) -> SelectedParams:
    """Input-dependent B, C and timescale from a conditioning sequence."""
    seq = as_tensor(seq)
    if seq.ndim != 2 or seq.shape[1] != params.width:
        raise ShapeError(
            f"select: sequence {seq.shape} does not match width {params.width}"
        )
    B = linear(seq, params.W_B)
    C = linear(seq, params.W_C)
    delta = softplus(linear(seq, params.W_delta, params.b_delta))
    return SelectedParams(B=B, C=C, delta=delta)


def discretize(delta, A, B) -> DiscreteParams:
    """Zero-order-hold conversion: Abar = exp(delta x A), Bbar = delta x B."""
    delta, A, B = as_tensor(delta), as_tensor(A), as_tensor(B)
    P, C = delta.shape
    N = A.shape[1]
    if A.shape != (C, N):
        raise ShapeError(f"discretize: A shape {A.shape} != ({C}, {N})")
    if B.shape != (P, N):
        raise ShapeError(f"discretize: B shape {B.shape} != ({P}, {N})")
    if np.any(delta.data <= 0):
        raise ContractViolation("discretize: delta must be strictly positive")
    Abar = zoh_abar(delta, A)
    assert_finite(Abar.data, "discretize: exp(delta * A)")
    Bbar = scale_outer(delta, B)
    return DiscreteParams(Abar=Abar, Bbar=Bbar)


def _scan(dp: DiscreteParams, Cmat, D, x, chunk=None) -> Tensor:
    Cmat, D, x = as_tensor(Cmat), as_tensor(D), as_tensor(x)
    P, C, N = dp.Abar.shape
    if x.shape != (P, C):
        raise ShapeError(f"scan: x shape {x.shape} != ({P}, {C})")
    if D.shape != (C,):
        raise ShapeError(f"scan: D shape {D.shape} != ({C},)")
    if Cmat.shape == (P, N):
        Cmat = broadcast_to(reshape(Cmat, (P, 1, N)), (P, C, N))
    elif Cmat.shape != (P, C, N):
        raise ShapeError(f"scan: Cmat shape {Cmat.shape} != ({P}, {N}) or ({P}, {C}, {N})")
    return selective_scan(dp.Abar, dp.Bbar, Cmat, D, x, chunk=chunk)


def scan_sequential(dp: DiscreteParams, Cmat, D, x) -> Tensor:
    """Step-by-step recurrence from h0 = 0; the reference scan path."""
    return _scan(dp, Cmat, D, x, chunk=None)


def scan_chunked(dp: DiscreteParams, Cmat, D, x, chunk: int) -> Tensor:
    """Blockwise scan via the associative map composition; same math."""
    return _scan(dp, Cmat, D, x, chunk=int(chunk))


def ssm_self(seq, params: SsmParams, chunk=None) -> Tensor:
    """Selective scan of a sequence conditioned on itself."""
    seq = as_tensor(seq)
    sel = select(seq, params)
    dp = discretize(sel.delta, params.A, sel.B)
    return _scan(dp, sel.C, params.D, seq, chunk=chunk)


def ssm_self_batched(seqs, params: SsmParams) -> Tensor:
    """Many independent single-feature sequences under one width-1 kernel.

    seqs is (P, Q): Q parallel sequences of length P, each with a scalar
    feature per step. Selection acts per sequence on that scalar, so the
    shared parameters stay independent of Q (no spatial-size-dependent
    weights). Used by the spectral scan, where Q is the number of pixels.
    """
    seqs = as_tensor(seqs)
    if params.width != 1:
        raise ShapeError(
            f"ssm_self_batched: params must have width 1, got {params.width}"
        )
    Q = seqs.shape[1]
    N = params.states
    delta = softplus(add(mul(seqs, reshape(params.W_delta, (1,))), params.b_delta))
    if np.any(delta.data <= 0):
        raise ContractViolation("ssm_self_batched: delta must be strictly positive")
    Abar = zoh_abar(delta, params.A)
    assert_finite(Abar.data, "ssm_self_batched: exp(delta * A)")
    # Bbar = delta x (seq x W_B) folds into one outer product.
    Bbar = scale_states(mul(delta, seqs), reshape(params.W_B, (N,)))
    Cm = scale_states(seqs, reshape(params.W_C, (N,)))
    D = broadcast_to(params.D, (Q,))
    return selective_scan(Abar, Bbar, Cm, D, seqs)


def fus_ssm(F_h, F_x, params_h: SsmParams, params_x: SsmParams):
    """Dual-input scan: each branch is parameterized by the other modality.

    The branch producing F_ho scans F_h while B, C and delta are selected
    from F_x through params_h's selection weights (A and D stay with the
    processed modality). The second branch mirrors this with the roles
    swapped. Returns (F_ho, F_xo).
    """
    F_h, F_x = as_tensor(F_h), as_tensor(F_x)
    if F_h.shape != F_x.shape:
        raise ShapeError(
            f"fus_ssm: sequence shapes differ: {F_h.shape} vs {F_x.shape}"
        )

    sel_h = select(F_x, params_h)
    dp_h = discretize(sel_h.delta, params_h.A, sel_h.B)
    F_ho = _scan(dp_h, sel_h.C, params_h.D, F_h)

    sel_x = select(F_h, params_x)
    dp_x = discretize(sel_x.delta, params_x.A, sel_x.B)
    F_xo = _scan(dp_x, sel_x.C, params_x.D, F_x)
    return F_ho, F_xo
