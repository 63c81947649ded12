"""Dense float tensors with a define-by-run reverse-mode tape.

A Tensor wraps a contiguous numpy array (float32 or float64) together with
the graph bookkeeping needed for backprop: the parent tensors it was
computed from and a vjp rule mapping an output cotangent to parent
cotangents. Leaf tensors created with requires_grad=True accumulate their
cotangent in .grad when backward() runs.

Tensors are treated as immutable values after construction; ops never write
into their inputs. The optimizer swaps in fresh arrays between batches.
"""

from __future__ import annotations

import contextlib

import numpy as np

_FLOAT_DTYPES = (np.float32, np.float64)

# Global switch: when False, ops skip graph construction (inference mode).
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (pure inference)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class ConfigError(ValueError):
    """A configuration value is outside its legal range."""


class NumericsError(ArithmeticError):
    """An operation produced a non-finite value from finite inputs."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        head = np.array2string(self.data, threshold=8, precision=5)
        return f"Tensor({head}, shape={self.data.shape}, dtype={self.data.dtype})"

    # Light operator sugar; the real rules live in ops.py.
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)


def as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def make_node(data: np.ndarray, parents, vjp) -> Tensor:
    """Wrap an op result; attaches the tape edge only when grads are live."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._vjp is not None for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _topo_order(root: Tensor):
    """Post-order over the DAG, iterative (scan graphs can be long-lived)."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        nid = id(node)
        if nid in visited:
            continue
        visited.add(nid)
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def backward(root: Tensor, seed=None, leaves=None):
    """Reverse-mode sweep from root.

    seed defaults to ones (the usual scalar-loss case). Returns a dict
    mapping each requested leaf (or every reached grad-requiring leaf) to
    its cotangent array; leaves in `leaves` that the root does not depend on
    get zero arrays. Cotangents also accumulate into leaf.grad so repeated
    calls sum, which is what gradient accumulation over a batch wants.
    """
    if seed is None:
        seed = np.ones_like(root.data)
    else:
        seed = np.asarray(seed, dtype=root.data.dtype)
        if seed.shape != root.data.shape:
            raise ShapeError(
                f"seed shape {seed.shape} != root shape {root.data.shape}"
            )

    grads = {id(root): seed}
    result = {}
    for node in reversed(_topo_order(root)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad and node._vjp is None:
            node.grad = g if node.grad is None else node.grad + g
            result[node] = g
        if node._vjp is None:
            continue
        parent_grads = node._vjp(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None:
                continue
            nid = id(p)
            if nid in grads:
                grads[nid] = grads[nid] + pg
            else:
                grads[nid] = pg

    if leaves is not None:
        return {
            leaf: result.get(leaf, np.zeros_like(leaf.data)) for leaf in leaves
        }
    return result


def assert_finite(arr: np.ndarray, what: str):
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite values in {what}")
