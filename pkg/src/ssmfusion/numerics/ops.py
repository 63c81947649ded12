"""Differentiable primitives on Tensors.

Every op computes its forward value with numpy and registers a hand-written
vjp rule on the result node. The finite-difference suite in gradcheck.py is
the oracle for all of these rules.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    ConfigError,
    ShapeError,
    Tensor,
    as_tensor,
    make_node,
)
from .. import kernels


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a cotangent back down to `shape` after numpy broadcasting."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_node(out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_node(out, (a, b), vjp)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_node(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        )

    return make_node(out, (a, b), vjp)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_node(out, (a,), lambda g: (g * out,))


def linear(x, W, b=None) -> Tensor:
    """y[..., j] = sum_i x[..., i] W[i, j] (+ b[j])."""
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[0]:
        raise ShapeError(
            f"linear: input width {x.shape[-1]} != weight rows {W.shape[0]}"
        )
    out = x.data @ W.data
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise ShapeError(f"linear: bias shape {b.shape} != ({W.shape[1]},)")
        out = out + b.data

    cin, cout = W.shape

    def vjp(g):
        gm = g.reshape(-1, cout)
        xm = x.data.reshape(-1, cin)
        gx = (g @ W.data.T).reshape(x.shape)
        gW = xm.T @ gm
        if b is None:
            return gx, gW
        return gx, gW, gm.sum(axis=0)

    parents = (x, W) if b is None else (x, W, b)
    return make_node(out, parents, vjp)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form: stable at both tails, single ufunc pass.
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def silu(x) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)
    out = x.data * s

    def vjp(g):
        return (g * (s * (1.0 + x.data * (1.0 - s))),)

    return make_node(out, (x,), vjp)


def softplus(x) -> Tensor:
    """log(1 + exp(x)) in the overflow-safe form, clamped strictly positive."""
    x = as_tensor(x)
    d = x.data
    out = np.maximum(d, 0.0) + np.log1p(np.exp(-np.abs(d)))
    # exp(-|x|) underflows near x = -745 (f64); keep the output > 0 anyway.
    np.maximum(out, np.finfo(d.dtype).tiny, out=out)

    def vjp(g):
        return (g * _sigmoid(d),)

    return make_node(out, (x,), vjp)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if eps <= 0:
        raise ConfigError("layer_norm: eps must be > 0")
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(
            f"layer_norm: gamma/beta must have shape ({c},), got "
            f"{gamma.shape} and {beta.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data

    def vjp(g):
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        gx = (dxhat - m1 - xhat * m2) * inv
        axes = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return make_node(out, (x, gamma, beta), vjp)


def depthwise_conv2d(x, k, stride: int = 1, bias=None) -> Tensor:
    """Per-channel 3x3 convolution, zero padding 1, stride 1 or 2.

    Output spatial dims are ceil(H/stride) x ceil(W/stride).
    """
    x, k = as_tensor(x), as_tensor(k)
    if stride not in (1, 2):
        raise ConfigError(f"depthwise_conv2d: stride must be 1 or 2, got {stride}")
    if x.ndim != 3:
        raise ShapeError(f"depthwise_conv2d: input must be (H, W, C), got {x.shape}")
    H, W, C = x.shape
    if k.shape != (3, 3, C):
        raise ShapeError(f"depthwise_conv2d: kernel must be (3, 3, {C}), got {k.shape}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (C,):
            raise ShapeError(f"depthwise_conv2d: bias must be ({C},), got {bias.shape}")

    xp = np.zeros((H + 2, W + 2, C), dtype=x.dtype)
    xp[1 : H + 1, 1 : W + 1] = x.data
    Ho = (H - 1) // stride + 1
    Wo = (W - 1) // stride + 1
    out = np.zeros((Ho, Wo, C), dtype=x.dtype)
    for u in range(3):
        for v in range(3):
            win = xp[
                u : u + stride * (Ho - 1) + 1 : stride,
                v : v + stride * (Wo - 1) + 1 : stride,
            ]
            out += win * k.data[u, v]
    if bias is not None:
        out = out + bias.data

    def vjp(g):
        gxp = np.zeros_like(xp)
        gk = np.empty_like(k.data)
        for u in range(3):
            for v in range(3):
                rows = slice(u, u + stride * (Ho - 1) + 1, stride)
                cols = slice(v, v + stride * (Wo - 1) + 1, stride)
                gxp[rows, cols] += g * k.data[u, v]
                gk[u, v] = (xp[rows, cols] * g).sum(axis=(0, 1))
        gx = gxp[1 : H + 1, 1 : W + 1]
        if bias is None:
            return gx, gk
        return gx, gk, g.sum(axis=(0, 1))

    parents = (x, k) if bias is None else (x, k, bias)
    return make_node(out, parents, vjp)


def _interp_axis(n_in: int, n_out: int, dtype):
    """Source indices and lerp weights for one axis, half-pixel centers."""
    s = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    s = np.clip(s, 0, n_in - 1)
    i0 = np.floor(s).astype(np.intp)
    np.minimum(i0, n_in - 1, out=i0)
    i1 = np.minimum(i0 + 1, n_in - 1)
    t = (s - i0).astype(dtype)
    return i0, i1, t


def interpolate_up2(x, target, mode: str = "bilinear") -> Tensor:
    """Resample (h, w, C) up to (H, W, C). Exact on constants and identity."""
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"interpolate_up2: input must be (h, w, C), got {x.shape}")
    h, w, C = x.shape
    H, W = target
    if H < h or W < w:
        raise ShapeError(
            f"interpolate_up2: target {target} smaller than source ({h}, {w})"
        )
    if mode not in ("bilinear", "nearest"):
        raise ConfigError(f"interpolate_up2: unknown mode {mode!r}")

    if mode == "nearest":
        ri = np.minimum(((np.arange(H) + 0.5) * (h / H)).astype(np.intp), h - 1)
        cj = np.minimum(((np.arange(W) + 0.5) * (w / W)).astype(np.intp), w - 1)
        out = x.data[ri][:, cj]

        def vjp_nn(g):
            gx = np.zeros_like(x.data)
            RI = np.broadcast_to(ri[:, None], (H, W))
            CJ = np.broadcast_to(cj[None, :], (H, W))
            np.add.at(gx, (RI, CJ), g)
            return (gx,)

        return make_node(out, (x,), vjp_nn)

    i0, i1, ti = _interp_axis(h, H, x.dtype)
    j0, j1, tj = _interp_axis(w, W, x.dtype)
    tiv = ti[:, None, None]
    tjv = tj[None, :, None]
    # Lerp form keeps constant fields and the size-preserving case exact.
    x00 = x.data[i0][:, j0]
    x01 = x.data[i0][:, j1]
    x10 = x.data[i1][:, j0]
    x11 = x.data[i1][:, j1]
    r0 = x00 + tjv * (x01 - x00)
    r1 = x10 + tjv * (x11 - x10)
    out = r0 + tiv * (r1 - r0)

    def vjp(g):
        gx = np.zeros_like(x.data)
        I0 = np.broadcast_to(i0[:, None], (H, W))
        I1 = np.broadcast_to(i1[:, None], (H, W))
        J0 = np.broadcast_to(j0[None, :], (H, W))
        J1 = np.broadcast_to(j1[None, :], (H, W))
        w11 = tiv * tjv
        w10 = tiv * (1 - tjv)
        w01 = (1 - tiv) * tjv
        w00 = (1 - tiv) * (1 - tjv)
        np.add.at(gx, (I0, J0), g * w00)
        np.add.at(gx, (I0, J1), g * w01)
        np.add.at(gx, (I1, J0), g * w10)
        np.add.at(gx, (I1, J1), g * w11)
        return (gx,)

    return make_node(out, (x,), vjp)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)
    return make_node(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = np.argsort(axes)
    out = np.transpose(x.data, axes)
    return make_node(out, (x,), lambda g: (np.transpose(g, inv),))


def broadcast_to(x, shape) -> Tensor:
    x = as_tensor(x)
    out = np.broadcast_to(x.data, shape)
    return make_node(out, (x,), lambda g: (_unbroadcast(g, x.shape),))


def take_perm(x, perm: np.ndarray, inv: np.ndarray | None = None) -> Tensor:
    """Reorder rows (axis 0) by a permutation index array."""
    x = as_tensor(x)
    if len(perm) != x.shape[0]:
        raise ShapeError(
            f"take_perm: permutation length {len(perm)} != rows {x.shape[0]}"
        )
    out = x.data[perm]
    if inv is None:
        inv = np.argsort(perm)

    return make_node(out, (x,), lambda g: (g[inv],))


def concat(parts, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return make_node(out, tuple(parts), vjp)


def _axis_tuple(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(a % ndim for a in axis)


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _axis_tuple(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            for a in sorted(axes):
                g = np.expand_dims(g, a)
        return (np.broadcast_to(g, x.shape),)

    return make_node(out, (x,), vjp)


def tmean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _axis_tuple(axis, x.ndim)
    count = 1
    for a in axes:
        count *= x.shape[a]
    out = x.data.mean(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            for a in sorted(axes):
                g = np.expand_dims(g, a)
        return (np.broadcast_to(g / count, x.shape),)

    return make_node(out, (x,), vjp)


def zoh_abar(delta, A) -> Tensor:
    """Fused exp(delta x A): delta (P, C), A (C, N) or (1, N) -> (P, C, N)."""
    delta, A = as_tensor(delta), as_tensor(A)
    P, C = delta.shape
    rows, N = A.shape
    if rows not in (C, 1):
        raise ShapeError(f"zoh_abar: A rows {rows} must be {C} or 1")
    with np.errstate(over="ignore"):  # callers check finiteness explicitly
        out = np.exp(delta.data[:, :, None] * A.data[None])

    def vjp(g):
        t = g * out
        gd = np.einsum("pcn,cn->pc", t, A.data) if rows == C else t @ A.data[0]
        gA = np.einsum("pcn,pc->cn", t, delta.data)
        if rows == 1:
            gA = gA.sum(axis=0, keepdims=True)
        return gd, gA

    return make_node(out, (delta, A), vjp)


def scale_outer(delta, B) -> Tensor:
    """Fused delta x B: delta (P, C), B (P, N) -> (P, C, N)."""
    delta, B = as_tensor(delta), as_tensor(B)
    out = delta.data[:, :, None] * B.data[:, None, :]

    def vjp(g):
        return (
            np.einsum("pcn,pn->pc", g, B.data),
            np.einsum("pcn,pc->pn", g, delta.data),
        )

    return make_node(out, (delta, B), vjp)


def scale_states(s, wvec) -> Tensor:
    """Fused outer product with a state vector: s (P, Q), w (N,) -> (P, Q, N)."""
    s, wvec = as_tensor(s), as_tensor(wvec)
    out = s.data[:, :, None] * wvec.data

    def vjp(g):
        return g @ wvec.data, np.einsum("pqn,pq->n", g, s.data)

    return make_node(out, (s, wvec), vjp)


def selective_scan(Abar, Bbar, Cmat, D, x, chunk: int | None = None) -> Tensor:
    """Linear recurrence h[p] = Abar[p] h[p-1] + Bbar[p] x[p], read out by Cmat.

    Shapes: Abar, Bbar, Cmat (P, C, N); D (C,); x (P, C). The backward pass
    replays the recurrence in reverse using the stored hidden states.
    """
    Abar, Bbar, Cmat = as_tensor(Abar), as_tensor(Bbar), as_tensor(Cmat)
    D, x = as_tensor(D), as_tensor(x)
    P, C, N = Abar.shape
    for name, t, shape in (
        ("Bbar", Bbar, (P, C, N)),
        ("Cmat", Cmat, (P, C, N)),
        ("D", D, (C,)),
        ("x", x, (P, C)),
    ):
        if t.shape != shape:
            raise ShapeError(f"selective_scan: {name} shape {t.shape} != {shape}")

    a = np.ascontiguousarray(Abar.data)
    b = np.ascontiguousarray(Bbar.data)
    c = np.ascontiguousarray(Cmat.data)
    d = np.ascontiguousarray(D.data)
    xv = np.ascontiguousarray(x.data)
    if chunk is None:
        y, h = kernels.scan_fwd(a, b, c, d, xv)
    else:
        if chunk < 1:
            raise ConfigError(f"selective_scan: chunk must be >= 1, got {chunk}")
        y, h = kernels.chunked_fwd(a, b, c, d, xv, chunk)

    def vjp(g):
        return kernels.scan_bwd(a, b, c, d, xv, h, np.ascontiguousarray(g))

    return make_node(y, (Abar, Bbar, Cmat, D, x), vjp)


def cross_entropy_logits(logits, label: int) -> Tensor:
    """Softmax cross-entropy between a logit vector and a class index."""
    logits = as_tensor(logits)
    if logits.ndim != 1:
        raise ShapeError(f"cross_entropy_logits: expected 1-D logits, got {logits.shape}")
    z = logits.data
    m = z.max()
    ez = np.exp(z - m)
    sez = ez.sum()
    loss = np.log(sez) + m - z[label]

    def vjp(g):
        p = ez / sez
        p[label] -= 1.0
        return (g * p,)

    return make_node(np.asarray(loss, dtype=z.dtype), (logits,), vjp)
