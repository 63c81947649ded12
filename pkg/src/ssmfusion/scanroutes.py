"""Bijective 2D-to-sequence flattening orders and the spectral reshape.

Each route is realized as a cached permutation over row-major flat indices,
so applying a route is a single gather and inverting it is the inverse
gather — exact, bit-level invertibility for free.
"""

from __future__ import annotations

import enum
import threading

import numpy as np

from .numerics import ShapeError, Tensor, as_tensor, reshape, take_perm, transpose


class RouteId(enum.Enum):
    ROW_FORWARD = "row_forward"
    COL_FORWARD = "col_forward"
    ROW_REVERSE = "row_reverse"
    COL_REVERSE = "col_reverse"
    DIAG_FORWARD = "diag_forward"
    ANTIDIAG_FORWARD = "antidiag_forward"


# Route-to-scale assignment and ablations slice this fixed order.
CANONICAL_ROUTES = (
    RouteId.ROW_FORWARD,
    RouteId.COL_FORWARD,
    RouteId.ROW_REVERSE,
    RouteId.COL_REVERSE,
    RouteId.DIAG_FORWARD,
    RouteId.ANTIDIAG_FORWARD,
)

_perm_cache: dict = {}
_cache_lock = threading.Lock()


def _build_permutation(H: int, W: int, route: RouteId) -> np.ndarray:
    if route is RouteId.ROW_FORWARD:
        return np.arange(H * W, dtype=np.intp)
    if route is RouteId.COL_FORWARD:
        return np.arange(H * W, dtype=np.intp).reshape(H, W).T.ravel()
    if route is RouteId.ROW_REVERSE:
        return _build_permutation(H, W, RouteId.ROW_FORWARD)[::-1].copy()
    if route is RouteId.COL_REVERSE:
        return _build_permutation(H, W, RouteId.COL_FORWARD)[::-1].copy()
    if route is RouteId.DIAG_FORWARD:
        idx = []
        for k in range(H + W - 1):
            for i in range(max(0, k - W + 1), min(H - 1, k) + 1):
                idx.append(i * W + (k - i))
        return np.asarray(idx, dtype=np.intp)
    if route is RouteId.ANTIDIAG_FORWARD:
        idx = []
        for k in range(H + W - 1):
            for i in range(max(0, k - W + 1), min(H - 1, k) + 1):
                idx.append(i * W + (W - 1 - (k - i)))
        return np.asarray(idx, dtype=np.intp)
    raise ValueError(f"unknown route {route!r}")


def route_permutation(H: int, W: int, route: RouteId) -> np.ndarray:
    """Flat row-major source index for each sequence position (read-only)."""
    key = (H, W, route)
    perm = _perm_cache.get(key)
    if perm is None:
        with _cache_lock:
            perm = _perm_cache.get(key)
            if perm is None:
                perm = _build_permutation(H, W, route)
                perm.setflags(write=False)
                _perm_cache[key] = perm
    return perm


def route_inverse(H: int, W: int, route: RouteId) -> np.ndarray:
    key = (H, W, route, "inv")
    inv = _perm_cache.get(key)
    if inv is None:
        with _cache_lock:
            inv = _perm_cache.get(key)
            if inv is None:
                inv = np.argsort(route_permutation(H, W, route), kind="stable")
                inv.setflags(write=False)
                _perm_cache[key] = inv
    return inv


def sigma(X, route: RouteId) -> Tensor:
    """Flatten (H, W, C) into the (H*W, C) sequence for one route."""
    X = as_tensor(X)
    if X.ndim != 3:
        raise ShapeError(f"sigma: expected (H, W, C), got {X.shape}")
    H, W, C = X.shape
    perm = route_permutation(H, W, route)
    inv = route_inverse(H, W, route)
    return take_perm(reshape(X, (H * W, C)), perm, inv)


def beta(seq, route: RouteId, H: int, W: int) -> Tensor:
    """Invert sigma: (H*W, C) sequence back to the (H, W, C) map."""
    seq = as_tensor(seq)
    if seq.ndim != 2 or seq.shape[0] != H * W:
        raise ShapeError(f"beta: expected ({H * W}, C), got {seq.shape}")
    perm = route_permutation(H, W, route)
    inv = route_inverse(H, W, route)
    return reshape(take_perm(seq, inv, perm), (H, W, seq.shape[1]))


def spectral_flatten(X, direction: str = "forward") -> Tensor:
    """Reshape (H, W, C) to (C, H*W): one spectral step per channel."""
    X = as_tensor(X)
    if X.ndim != 3:
        raise ShapeError(f"spectral_flatten: expected (H, W, C), got {X.shape}")
    if direction not in ("forward", "reverse"):
        raise ValueError(f"spectral_flatten: bad direction {direction!r}")
    H, W, C = X.shape
    out = transpose(reshape(X, (H * W, C)), (1, 0))
    if direction == "reverse":
        rev = np.arange(C - 1, -1, -1, dtype=np.intp)
        out = take_perm(out, rev, rev)
    return out


def spectral_unflatten(S, H: int, W: int, direction: str = "forward") -> Tensor:
    """Invert spectral_flatten back to (H, W, C)."""
    S = as_tensor(S)
    if S.ndim != 2 or S.shape[1] != H * W:
        raise ShapeError(f"spectral_unflatten: expected (C, {H * W}), got {S.shape}")
    C = S.shape[0]
    if direction == "reverse":
        rev = np.arange(C - 1, -1, -1, dtype=np.intp)
        S = take_perm(S, rev, rev)
    return reshape(transpose(S, (1, 0)), (H, W, C))
