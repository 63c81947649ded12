"""Scan kernel backends.

The compiled Cython extension is used when it imported cleanly; otherwise
the pure-numpy twin takes over. Both expose the same scan_fwd / scan_bwd
contract and are kept bitwise-comparable (same operation order, no fused
multiply-add in the compiled build). Set SSMFUSION_BACKEND=numpy|cython to
force a choice; `scanbench` times whichever backends are available.
"""

from __future__ import annotations

import os

import numpy as np

from . import _scan_np

try:
    from . import _scan_cy

    _HAVE_CYTHON = True
except ImportError:
    _scan_cy = None
    _HAVE_CYTHON = False


class _CythonBackend:
    name = "cython"

    @staticmethod
    def scan_fwd(Abar, Bbar, Cmat, D, x):
        y = np.empty_like(x)
        h = np.empty_like(Abar)
        _scan_cy.scan_fwd(Abar, Bbar, Cmat, D, x, y, h)
        return y, h

    @staticmethod
    def scan_bwd(Abar, Bbar, Cmat, D, x, h, gy):
        P, C, N = Abar.shape
        dA = np.empty_like(Abar)
        dB = np.empty_like(Bbar)
        dC = np.empty_like(Cmat)
        dD = np.zeros_like(D)
        dx = np.empty_like(x)
        carry = np.zeros((C, N), dtype=x.dtype)
        _scan_cy.scan_bwd(Abar, Bbar, Cmat, D, x, h, gy, dA, dB, dC, dD, dx, carry)
        return dA, dB, dC, dD, dx


_BACKENDS = {"numpy": _scan_np}
if _HAVE_CYTHON:
    _BACKENDS["cython"] = _CythonBackend


def available_backends() -> dict:
    return dict(_BACKENDS)


def _pick_default():
    forced = os.environ.get("SSMFUSION_BACKEND", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(
                f"SSMFUSION_BACKEND={forced!r} but available backends are "
                f"{sorted(_BACKENDS)}"
            )
        return _BACKENDS[forced]
    return _BACKENDS.get("cython", _scan_np)


_active = _pick_default()


def backend_name() -> str:
    return _active.name


def set_backend(name: str):
    """Switch the active backend (tests and benchmarks only)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; have {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]


def scan_fwd(Abar, Bbar, Cmat, D, x):
    return _active.scan_fwd(Abar, Bbar, Cmat, D, x)


def scan_bwd(Abar, Bbar, Cmat, D, x, h, gy):
    return _active.scan_bwd(Abar, Bbar, Cmat, D, x, h, gy)


# The chunked path is backend-independent numpy; it is the production-style
# variant cross-checked against the sequential oracle.
chunked_fwd = _scan_np.chunked_fwd
