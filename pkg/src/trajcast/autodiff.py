"""Reverse-mode automatic differentiation over dense float64 arrays.

A Tensor wraps a numpy array and remembers how it was produced. Calling
``backward`` on a scalar walks the recorded graph in reverse topological
order and accumulates gradients into every reachable tensor that has
``requires_grad`` set. Inference code can wrap forward passes in
``no_grad()`` to skip the bookkeeping entirely.

Arrays handed to an operation are treated as immutable for the lifetime
of the graph built from them; in-place parameter updates (Adam) happen
between graphs, never inside one.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backprop: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Same values, cut off from the recorded graph."""
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; every op below handles float/array lifting.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _node(data: np.ndarray, parents: Sequence[Tensor], backprop) -> Tensor:
    """Create an op result, recording parents only when gradients can flow."""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        out._parents = tuple(parents)
        out._backprop = backprop
        return out
    return Tensor(data)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros(t.data.shape, dtype=np.float64)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to `shape`, undoing numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# primitive operations


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data + b.data

    def backprop(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), backprop)


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data - b.data

    def backprop(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _node(data, (a, b), backprop)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data * b.data

    def backprop(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), backprop)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    # The transposed orientation keeps each left-hand row's accumulation
    # independent of where the row sits in the batch, so row-wise maps stay
    # bitwise equivariant under row permutations (skinny-output gemm kernels
    # are not, because remainder rows take a different code path).
    data = (b.data.T @ a.data.T).T

    def backprop(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(data, (a, b), backprop)


def linear(x: Tensor, w: Tensor, b: Tensor, activate: bool = False) -> Tensor:
    """Fused x @ w + b with an optional ReLU, recorded as one node.

    Numerically identical to the unfused composition; fusing keeps the op
    count (and graph size) low on deep per-step rollouts.
    """
    if x.data.shape[1] != w.data.shape[0]:
        raise ValueError(f"linear shape mismatch: {x.data.shape} @ {w.data.shape}")
    z = (w.data.T @ x.data.T).T + b.data  # transposed gemm: see matmul
    data = np.maximum(z, 0.0) if activate else z

    def backprop(g):
        if activate:
            g = np.where(z > 0, g, 0.0)
        _accum(x, g @ w.data.T)
        _accum(w, x.data.T @ g)
        _accum(b, g.sum(axis=0))

    return _node(data, (x, w, b), backprop)


def relu(a: Tensor) -> Tensor:
    keep = a.data > 0
    data = np.maximum(a.data, 0.0)  # np.maximum propagates NaN; error states stay visible

    def backprop(g):
        _accum(a, np.where(keep, g, 0.0))

    return _node(data, (a,), backprop)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backprop(g):
        _accum(a, g * data)

    return _node(data, (a,), backprop)


def square(a: Tensor) -> Tensor:
    data = a.data * a.data

    def backprop(g):
        _accum(a, 2.0 * a.data * g)

    return _node(data, (a,), backprop)


def reduce_sum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backprop(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg, a.data.shape).copy())

    return _node(data, (a,), backprop)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    data = a.data.reshape(shape)

    def backprop(g):
        _accum(a, g.reshape(a.data.shape))

    return _node(data, (a,), backprop)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backprop(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])

    return _node(data, tensors, backprop)


def narrow(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    data = a.data[idx]

    def backprop(g):
        if a.requires_grad:
            full = np.zeros(a.data.shape, dtype=np.float64)
            full[idx] = g
            _accum(a, full)

    return _node(data, (a,), backprop)


def exact_matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with exactly-rounded accumulation per output entry.

    Meant for small matrices (attention-weight mixing): the forward result
    is invariant under permutations of the summed axis, which plain BLAS
    accumulation is not. The backward pass uses ordinary matmuls.
    """
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"exact_matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    rows, inner = a.data.shape
    cols = b.data.shape[1]
    data = np.empty((rows, cols), dtype=np.float64)
    for i in range(rows):
        products = a.data[i, :, None] * b.data
        for j in range(cols):
            data[i, j] = math.fsum(products[:, j])

    def backprop(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(data, (a, b), backprop)


def transpose(a: Tensor) -> Tensor:
    data = a.data.T

    def backprop(g):
        _accum(a, g.T)

    return _node(data, (a,), backprop)


def row_norms(a: Tensor) -> Tensor:
    """Euclidean norm of each row of a 2-D tensor, shape [n, 1].

    The gradient at an exactly-zero row is taken to be 0 (a valid
    subgradient); elsewhere it is row / ||row||.
    """
    data = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True))

    def backprop(g):
        safe = np.where(data > 0.0, data, 1.0)
        _accum(a, g * np.where(data > 0.0, a.data / safe, 0.0))

    return _node(data, (a,), backprop)


def masked_softmax_rows(logits: Tensor, mask: np.ndarray) -> Tensor:
    """Row-wise softmax restricted to the support of a binary mask.

    Masked entries get weight exactly 0; the surviving entries of each row
    sum to 1. Rows whose mask is entirely zero come out as all-zero rows
    (callers that cannot tolerate this must guarantee non-empty rows, as
    the social mask does via its unit diagonal).

    Row sums use exactly-rounded accumulation so the result is invariant,
    bit for bit, under simultaneous row/column permutations.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != logits.data.shape:
        raise ValueError(f"mask shape {mask.shape} != logits shape {logits.data.shape}")
    keep = mask > 0
    shifted = np.where(keep, logits.data, -np.inf)
    rowmax = shifted.max(axis=1, keepdims=True)
    rowmax = np.where(np.isfinite(rowmax), rowmax, 0.0)
    e = np.exp(shifted - rowmax)
    e = np.where(keep, e, 0.0)
    total = np.array([math.fsum(row) for row in e], dtype=np.float64).reshape(-1, 1)
    data = np.divide(e, total, out=np.zeros_like(e), where=total > 0)

    def backprop(g):
        inner = (g * data).sum(axis=1, keepdims=True)
        _accum(logits, data * (g - inner))

    return _node(data, (logits,), backprop)


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into .grad for every tensor reachable from loss.

    Gradients on leaf tensors (parameters) accumulate across calls; interior
    node gradients are reset at the start of each call.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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
    for node in order:
        if node._parents:
            node.grad = None
    loss.grad = np.ones(loss.data.shape, dtype=np.float64)
    for node in reversed(order):
        if node._backprop is not None and node.grad is not None:
            node._backprop(node.grad)


# ---------------------------------------------------------------------------
# finite-difference oracle


def fd_gradient(fn: Callable[[], np.ndarray | float], tensor: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of fn() w.r.t. every entry of `tensor`.

    fn is re-evaluated with single entries of tensor.data perturbed in
    place and must recompute its result from the current values. It may
    return a scalar or a 1-D array of outputs; the result has shape
    (*fn_output, *tensor.shape).
    """
    flat = tensor.data.reshape(-1)
    probe = np.atleast_1d(np.asarray(fn(), dtype=np.float64))
    out = np.zeros(probe.shape + (flat.size,), dtype=np.float64)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = np.atleast_1d(np.asarray(fn(), dtype=np.float64))
        flat[i] = orig - h
        fm = np.atleast_1d(np.asarray(fn(), dtype=np.float64))
        flat[i] = orig
        out[..., i] = (fp - fm) / (2.0 * h)
    return out.reshape(probe.shape + tensor.data.shape)
