"""Finite-difference verification of the tape's gradients.

Central differences are the independent oracle: they never touch the vjp
rules, only repeated forward evaluations with perturbed leaf values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ConfigError, ShapeError, Tensor, backward


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_err: float
    tol: float
    per_input: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"gradcheck {status}: max_rel_err={self.max_rel_err:.3e} tol={self.tol:.1e}"


def _rel_err(g_ad: np.ndarray, g_fd: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(g_ad), np.abs(g_fd)))
    return float(np.max(np.abs(g_ad - g_fd) / denom)) if g_ad.size else 0.0


def grad_check(f, x, step: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare backward() against central differences for a scalar function.

    `f` is called with no arguments and must read the checked tensors; `x`
    is one Tensor or a sequence of Tensors whose gradients are verified.
    Relative error per component is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
    """
    xs = [x] if isinstance(x, Tensor) else list(x)
    for t in xs:
        if t.dtype != np.float64:
            raise ConfigError("grad_check requires float64 inputs")
        t.zero_grad()

    out = f()
    if out.size != 1:
        raise ShapeError(f"grad_check: f must be scalar-valued, got shape {out.shape}")
    grads = backward(out, leaves=xs)

    max_err = 0.0
    per_input = []
    for t in xs:
        g_ad = grads[t]
        g_fd = np.empty_like(t.data)
        flat = t.data.ravel()
        fd_flat = g_fd.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = float(f().data)
            flat[i] = orig - step
            fm = float(f().data)
            flat[i] = orig
            fd_flat[i] = (fp - fm) / (2.0 * step)
        err = _rel_err(g_ad, g_fd)
        per_input.append(err)
        max_err = max(max_err, err)
        t.zero_grad()

    return GradCheckReport(passed=max_err < tol, max_rel_err=max_err, tol=tol, per_input=per_input)
