"""Reverse-mode autodiff on NumPy arrays.

A Tensor wraps a float64 array plus an optional gradient and a back-reference
to the operation that produced it.  Graphs are built eagerly by the op
functions and consumed once by backward(); each node carries a visit counter
so the visit-exactly-once property is assertable in tests.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from ..errors import ShapeError


class Tensor:
    """Dense n-d array node participating in reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "visits", "name")

    def __init__(self, data, requires_grad: bool = False, parents: Sequence["Tensor"] = (),
                 backward_fn=None, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents = tuple(parents)
        self._backward_fn = backward_fn
        self.visits = 0
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def backward(self, grad: Optional[np.ndarray] = None):
        """Backpropagate from this node; visits each graph node exactly once."""
        if not self.requires_grad:
            raise ShapeError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without seed grad needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        accumulate_grad(self, np.asarray(grad, dtype=np.float64))
        for node in reversed(_topo_order(self)):
            node.visits += 1
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # Light arithmetic sugar; heavy ops live in chunkprobe.nn.ops.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return scale(self, other)

    __rmul__ = __mul__


def parameter(data, name: Optional[str] = None) -> Tensor:
    """A trainable leaf tensor."""
    return Tensor(data, requires_grad=True, name=name)


def accumulate_grad(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if g.shape != t.data.shape:
        raise ShapeError(f"gradient shape {g.shape} does not match tensor shape {t.data.shape}")
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _topo_order(root: Tensor) -> list:
    """Post-order over the grad-requiring subgraph (iterative, acyclic)."""
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _make(data, parents: Iterable[Tensor], backward_fn, name=None) -> Tensor:
    parents = tuple(parents)
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, parents=parents,
                  backward_fn=backward_fn if req else None, name=name)


# ---------------------------------------------------------------------------
# Structural ops used to compose models and losses.
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    out = _make(a.data + b.data, (a, b), None, name="add")

    def bw(g):
        accumulate_grad(a, g)
        accumulate_grad(b, g)

    out._backward_fn = bw if out.requires_grad else None
    return out


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = _make(a.data * c, (a,), None, name="scale")

    def bw(g):
        accumulate_grad(a, g * c)

    out._backward_fn = bw if out.requires_grad else None
    return out


def tsum(a: Tensor) -> Tensor:
    out = _make(np.asarray(a.data.sum()), (a,), None, name="sum")

    def bw(g):
        accumulate_grad(a, np.full(a.shape, float(g)))

    out._backward_fn = bw if out.requires_grad else None
    return out


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    out = _make(np.asarray(a.data.mean()), (a,), None, name="mean")

    def bw(g):
        accumulate_grad(a, np.full(a.shape, float(g) / n))

    out._backward_fn = bw if out.requires_grad else None
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = _make(a.data.reshape(shape), (a,), None, name="reshape")

    def bw(g):
        accumulate_grad(a, g.reshape(a.shape))

    out._backward_fn = bw if out.requires_grad else None
    return out


def narrow(a: Tensor, start: int, stop: int, axis: int = -1) -> Tensor:
    """Slice [start:stop) along one axis, with scatter-back gradient."""
    key = [slice(None)] * a.ndim
    key[axis] = slice(start, stop)
    key = tuple(key)
    out = _make(a.data[key], (a,), None, name="narrow")

    def bw(g):
        full = np.zeros_like(a.data)
        full[key] = g
        accumulate_grad(a, full)

    out._backward_fn = bw if out.requires_grad else None
    return out


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("stack: empty tensor list")
    out = _make(np.stack([t.data for t in tensors], axis=axis), tensors, None, name="stack")

    def bw(g):
        for i, t in enumerate(tensors):
            accumulate_grad(t, np.take(g, i, axis=axis))

    out._backward_fn = bw if out.requires_grad else None
    return out
