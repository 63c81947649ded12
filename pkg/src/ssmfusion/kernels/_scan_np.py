"""Pure-numpy scan kernels: the fallback backend and the chunked variant.

The recurrence, per channel c and state n with h[-1] = 0:

    h[p] = Abar[p] * h[p-1] + Bbar[p] * x[p]
    y[p] = sum_n Cmat[p, c, n] * h[p, c, n] + D[c] * x[p, c]

All summations over the state axis run left-to-right so the compiled
backend (plain accumulation loops) produces bitwise-identical results.
"""

from __future__ import annotations

import numpy as np

name = "numpy"


def _sum_states(prod: np.ndarray) -> np.ndarray:
    """Left-to-right sum over the trailing state axis."""
    acc = prod[..., 0].copy()
    for n in range(1, prod.shape[-1]):
        acc += prod[..., n]
    return acc


def scan_fwd(Abar, Bbar, Cmat, D, x):
    P, C, N = Abar.shape
    h = np.empty_like(Abar)
    y = np.empty_like(x)
    state = np.zeros((C, N), dtype=x.dtype)
    for p in range(P):
        state = Abar[p] * state + Bbar[p] * x[p][:, None]
        h[p] = state
        y[p] = _sum_states(Cmat[p] * state) + D * x[p]
    return y, h


def scan_bwd(Abar, Bbar, Cmat, D, x, h, gy):
    P, C, N = Abar.shape
    dA = np.empty_like(Abar)
    dB = np.empty_like(Bbar)
    dC = np.empty_like(Cmat)
    dx = np.empty_like(x)
    carry = np.zeros((C, N), dtype=x.dtype)
    zero = np.zeros((C, N), dtype=x.dtype)
    for p in range(P - 1, -1, -1):
        gyp = gy[p][:, None]
        gh = gyp * Cmat[p] + carry
        dC[p] = gyp * h[p]
        hprev = h[p - 1] if p > 0 else zero
        dA[p] = gh * hprev
        dB[p] = gh * x[p][:, None]
        dx[p] = _sum_states(gh * Bbar[p]) + D * gy[p]
        carry = gh * Abar[p]
    dD = (gy * x).sum(axis=0)
    return dA, dB, dC, dD, dx


def chunked_fwd(Abar, Bbar, Cmat, D, x, chunk: int):
    """Blockwise scan: local scans per chunk, then a fixed-order carry pass.

    Each chunk is summarized by the affine map h_out = a * h_in + b built
    from the composition (a2, b2) o (a1, b1) = (a2*a1, a2*b1 + b2); carries
    are combined across chunks in index order, which pins the reduction
    tree and keeps results deterministic.
    """
    P, C, N = Abar.shape
    chunk = min(chunk, P)
    K = -(-P // chunk)
    pad = K * chunk - P

    u = Bbar * x[:, :, None]
    if pad:
        A_r = np.concatenate(
            [Abar, np.ones((pad, C, N), dtype=Abar.dtype)], axis=0
        ).reshape(K, chunk, C, N)
        u_r = np.concatenate(
            [u, np.zeros((pad, C, N), dtype=u.dtype)], axis=0
        ).reshape(K, chunk, C, N)
    else:
        A_r = Abar.reshape(K, chunk, C, N)
        u_r = u.reshape(K, chunk, C, N)

    # Local scans from a zero state, plus the running product of Abar.
    h_loc = np.empty_like(A_r)
    A_cum = np.empty_like(A_r)
    s = np.zeros((K, C, N), dtype=x.dtype)
    a = np.ones((K, C, N), dtype=x.dtype)
    for i in range(chunk):
        s = A_r[:, i] * s + u_r[:, i]
        a = a * A_r[:, i]
        h_loc[:, i] = s
        A_cum[:, i] = a

    if K == 1:
        h = h_loc.reshape(K * chunk, C, N)
    else:
        carries = np.empty((K, C, N), dtype=x.dtype)
        carry = np.zeros((C, N), dtype=x.dtype)
        for k in range(K):
            carries[k] = carry
            carry = a[k] * carry + s[k]
        h = (h_loc + A_cum * carries[:, None]).reshape(K * chunk, C, N)
    if pad:
        h = h[:P]
    h = np.ascontiguousarray(h)
    y = _sum_states(Cmat * h) + D * x
    return y, h
