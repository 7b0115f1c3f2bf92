"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor records the operations that produced it; backward() replays the
tape in reverse topological order, visiting each node exactly once.  Only
what the models need is implemented: broadcasting arithmetic, matmul,
relu, reductions, (log-)softmax, embedding lookup and gather.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording, e.g. during decoding."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_grad_shared")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self._grad_shared = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None
        self._grad_shared = False

    # -- graph construction ------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        if _grad_enabled and any(p.requires_grad for p in parents):
            return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)
        return Tensor(data)

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    def _accumulate(self, grad: np.ndarray):
        # first write adopts the incoming buffer (which may be shared with a
        # sibling via a pass-through backward); later writes allocate once,
        # after which in-place accumulation is safe
        if self.grad is None:
            self.grad = grad
            self._grad_shared = True
        elif self._grad_shared:
            self.grad = self.grad + grad
            self._grad_shared = False
        else:
            self.grad += grad

    # -- arithmetic ----------------------------------------------------------

    @staticmethod
    def _lift(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(np.asarray(value))

    def __add__(self, other):
        other = self._lift(other)
        out_data = self.data + other.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        return self._make(out_data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            if self.requires_grad:
                self._accumulate(-g)

        return self._make(-self.data, (self,), backward)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        out_data = self.data * other.data

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return self._make(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        return self * other ** -1.0

    def __pow__(self, exponent: float):
        out_data = self.data ** exponent

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * exponent * self.data ** (exponent - 1.0))

        return self._make(out_data, (self,), backward)

    def __matmul__(self, other):
        other = self._lift(other)
        a, b = self.data, other.data
        # stacked @ matrix is a single flattened GEMM, much faster than
        # numpy's per-batch loop
        flat = a.ndim > 2 and b.ndim == 2
        if flat:
            out_data = (a.reshape(-1, a.shape[-1]) @ b).reshape(*a.shape[:-1], b.shape[-1])
        else:
            out_data = np.matmul(a, b)

        def backward(g):
            if flat:
                g2 = g.reshape(-1, g.shape[-1])
                if self.requires_grad:
                    self._accumulate((g2 @ b.T).reshape(a.shape))
                if other.requires_grad:
                    other._accumulate(a.reshape(-1, a.shape[-1]).T @ g2)
                return
            if self.requires_grad:
                da = np.matmul(g, b.swapaxes(-1, -2))
                self._accumulate(_unbroadcast_matmul(da, a.shape))
            if other.requires_grad:
                db = np.matmul(a.swapaxes(-1, -2), g)
                other._accumulate(_unbroadcast_matmul(db, b.shape))

        return self._make(out_data, (self, other), backward)

    # -- shaping -------------------------------------------------------------

    def reshape(self, *shape):
        original = self.data.shape
        out_data = self.data.reshape(*shape)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g.reshape(original))

        return self._make(out_data, (self,), backward)

    def swapaxes(self, a: int, b: int):
        out_data = self.data.swapaxes(a, b)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g.swapaxes(a, b))

        return self._make(out_data, (self,), backward)

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if not self.requires_grad:
                return
            if axis is None:
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())
                return
            if not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape).copy())

        return self._make(out_data, (self,), backward)

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- nonlinearities --------------------------------------------------------

    def relu(self):
        out_data = np.maximum(self.data, 0)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * (self.data > 0))

        return self._make(out_data, (self,), backward)

    def exp(self):
        out_data = np.exp(self.data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * out_data)

        return self._make(out_data, (self,), backward)

    def astype(self, dtype):
        original = self.data.dtype
        out_data = self.data.astype(dtype)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g.astype(original))

        return self._make(out_data, (self,), backward)

    def log(self):
        out_data = np.log(self.data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g / self.data)

        return self._make(out_data, (self,), backward)


def _unbroadcast_matmul(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis in range(grad.ndim - 2):
        if shape[axis] == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out_data = exp / exp.sum(axis=axis, keepdims=True)

    def backward(g):
        if t.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            t._accumulate(out_data * (g - inner))

    return Tensor._make(out_data, (t,), backward)


def log_softmax(t: Tensor, axis: int = -1) -> Tensor:
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - log_norm

    def backward(g):
        if t.requires_grad:
            soft = np.exp(out_data)
            t._accumulate(g - soft * g.sum(axis=axis, keepdims=True))

    return Tensor._make(out_data, (t,), backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)
    out_data = table.data[ids]

    def backward(g):
        if table.requires_grad:
            # scatter-add via one-hot GEMM; np.add.at is an order of
            # magnitude slower for these sizes
            flat_ids = ids.reshape(-1)
            flat_g = g.reshape(-1, g.shape[-1])
            one_hot = np.zeros((flat_ids.size, table.data.shape[0]), dtype=g.dtype)
            one_hot[np.arange(flat_ids.size), flat_ids] = 1.0
            table._accumulate(one_hot.T @ flat_g)

    return Tensor._make(out_data, (table,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv
    out_data = x_hat * gamma.data + beta.data

    def backward(g):
        if beta.requires_grad:
            beta._accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))
        if gamma.requires_grad:
            gamma._accumulate((g * x_hat).reshape(-1, g.shape[-1]).sum(axis=0))
        if x.requires_grad:
            gy = g * gamma.data
            term = gy - gy.mean(axis=-1, keepdims=True) \
                - x_hat * (gy * x_hat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * term)

    return Tensor._make(out_data, (x, gamma, beta), backward)


def gather_last(t: Tensor, index: np.ndarray) -> Tensor:
    """Pick index[..., None] along the last axis; used for target log-probs."""
    index = np.asarray(index)
    expanded = index[..., None]
    out_data = np.take_along_axis(t.data, expanded, axis=-1)[..., 0]

    def backward(g):
        if t.requires_grad:
            grad = np.zeros_like(t.data)
            np.put_along_axis(grad, expanded, g[..., None], axis=-1)
            t._accumulate(grad)

    return Tensor._make(out_data, (t,), backward)
