"""Dense tensors with a reverse-mode gradient tape.

Every operation in :mod:`ctxrank.nn.ops` returns a :class:`Tensor` that
remembers its inputs and a closure mapping the output gradient to input
gradients. Calling :meth:`Tensor.backward` on a scalar walks the recorded
graph in reverse topological order, accumulates gradients into leaf
:class:`Parameter` objects and then frees the graph.
"""

import contextlib

import numpy as np

from ..errors import BackwardBeforeForward

_recording = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation passes)."""
    global _recording
    previous = _recording
    _recording = False
    try:
        yield
    finally:
        _recording = previous


def is_recording():
    return _recording


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name="", dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        if not np.issubdtype(self.data.dtype, np.floating):
            self.data = self.data.astype(np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    # operator sugar, resolved lazily to avoid an import cycle with ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops
        if np.isscalar(other):
            return ops.scale(self, other)
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def backward(self, grad=None):
        """Back-propagate from this tensor into every reachable parameter."""
        if self._backward is None and not self.requires_grad:
            raise BackwardBeforeForward(
                "no recorded computation reaches this tensor; run a forward pass "
                "with recording enabled first (the graph is freed after backward)"
            )
        if grad is None:
            if self.data.size != 1:
                raise BackwardBeforeForward("implicit gradient needs a scalar output")
            grad = np.ones_like(self.data)

        order = _topological_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not _needs_grad(parent):
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg
        for node in order:
            if node._backward is not None:
                node._parents = ()
                node._backward = None


class Parameter(Tensor):
    """A learnable leaf tensor; its ``grad`` is kept the same shape as ``data``."""

    __slots__ = ()

    def __init__(self, data, name="", dtype=None):
        super().__init__(data, requires_grad=True, name=name, dtype=dtype)
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)


def _needs_grad(t):
    return t.requires_grad or t._backward is not None


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and _needs_grad(parent):
                stack.append((parent, False))
    return order


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def make_result(data, parents, backward):
    """Wrap ``data`` as an op output, recording the graph edge when needed."""
    out = Tensor(data)
    if _recording and any(_needs_grad(p) for p in parents):
        out._parents = tuple(parents)
        out._backward = backward
    return out
