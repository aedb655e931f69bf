"""The differentiable operation catalogue.

Shapes are checked explicitly; the only implicit expansion supported is a
right-aligned "bias" operand whose shape equals the trailing axes of the
other operand, and a 2-D weight on the right of a batched ``matmul``.
"""

import numpy as np

from ..errors import InvalidProbability, ShapeMismatch
from .tensor import Tensor, as_tensor, make_result

MASK_VALUE = -1e9


def _is_trailing(small, big):
    return len(small) <= len(big) and tuple(big[len(big) - len(small):]) == tuple(small)


def _reduce_to(grad, shape):
    if grad.shape == tuple(shape):
        return grad
    lead = grad.ndim - len(shape)
    return grad.sum(axis=tuple(range(lead)))


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and not _is_trailing(b.shape, a.shape):
        if _is_trailing(a.shape, b.shape):
            a, b = b, a
        else:
            raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")
    sa, sb = a.shape, b.shape
    return make_result(a.data + b.data, (a, b),
                       lambda g: (_reduce_to(g, sa), _reduce_to(g, sb)))


def sub(a, b):
    return add(a, scale(as_tensor(b), -1.0))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}")
    return make_result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(x, c):
    x = as_tensor(x)
    c = float(c)
    return make_result(x.data * c, (x,), lambda g: (g * c,))


def matmul(a, b):
    """``a @ b`` with ``a`` of shape (..., n, k) and ``b`` (k, m) or (..., k, m)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeMismatch(f"matmul batch dims: {a.shape} @ {b.shape}")
    if b.ndim > a.ndim:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        if bd.ndim == 2:
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.swapaxes(ad, -1, -2) @ g
        return ga, gb

    return make_result(ad @ bd, (a, b), backward)


def transpose(x):
    """Swap the last two axes."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeMismatch(f"transpose needs >= 2 axes, got {x.shape}")
    return make_result(np.swapaxes(x.data, -1, -2), (x,),
                       lambda g: (np.swapaxes(g, -1, -2),))


def relu(x):
    x = as_tensor(x)
    keep = x.data > 0
    return make_result(np.where(keep, x.data, 0.0).astype(x.dtype), (x,),
                       lambda g: (g * keep,))


def sigmoid(x):
    x = as_tensor(x)
    out = _sigmoid(x.data)
    return make_result(out, (x,), lambda g: (g * out * (1.0 - out),))


def _sigmoid(z):
    # split by sign so neither branch overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)
    return make_result(out, (x,), lambda g: (g * out,))


def log(x):
    x = as_tensor(x)
    return make_result(np.log(x.data), (x,), lambda g: (g / x.data,))


def row_softmax(x, additive_mask=None):
    """Softmax over the last axis of ``x + additive_mask``.

    ``additive_mask`` is a constant array broadcastable to ``x`` (0 for
    visible entries, :data:`MASK_VALUE` for hidden ones); it receives no
    gradient.
    """
    x = as_tensor(x)
    z = x.data if additive_mask is None else x.data + additive_mask
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return make_result(out, (x,), backward)


def key_mask(mask, dtype=np.float64):
    """Additive attention mask of shape (..., 1, l) from a boolean (..., l) validity mask."""
    mask = np.asarray(mask, dtype=bool)
    return np.where(mask, 0.0, MASK_VALUE).astype(dtype)[..., None, :]


def layer_norm(x, gain, bias, eps=1e-6):
    """Normalise the last axis to zero mean / unit variance, then apply ``gain`` and ``bias``."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeMismatch(f"layer_norm: x {x.shape}, gain {gain.shape}, bias {bias.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        gxhat = g * gain.data
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        flat = g.reshape(-1, d)
        return gx, (flat * xhat.reshape(-1, d)).sum(axis=0), flat.sum(axis=0)

    return make_result(out, (x, gain, bias), backward)


def dropout(x, p_drop, mode, rng=None):
    """Inverted dropout: train mode zeroes entries with probability ``p_drop``
    and rescales survivors by ``1/(1-p_drop)``; eval mode is the identity."""
    if not 0.0 <= p_drop < 1.0:
        raise InvalidProbability(f"p_drop must lie in [0, 1), got {p_drop}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = as_tensor(x)
    if mode == "eval" or p_drop == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    keep = (rng.random(x.shape) >= p_drop).astype(x.dtype) / (1.0 - p_drop)
    return make_result(x.data * keep, (x,), lambda g: (g * keep,))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
                s != r for i, (s, r) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ShapeMismatch(f"concat: {[t.shape for t in tensors]} on axis {axis}")
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]
    out = np.concatenate([t.data for t in tensors], axis=ax)
    return make_result(out, tuple(tensors),
                       lambda g: tuple(np.split(g, bounds, axis=ax)))


def slice(x, start, stop, axis=-1):
    """Contiguous ``[start:stop]`` slice along ``axis``."""
    x = as_tensor(x)
    ax = axis % x.ndim
    if not 0 <= start < stop <= x.shape[ax]:
        raise ShapeMismatch(f"slice [{start}:{stop}] out of range for axis of size {x.shape[ax]}")
    index = [np.s_[:]] * x.ndim
    index[ax] = np.s_[start:stop]
    index = tuple(index)

    def backward(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return make_result(x.data[index], (x,), backward)


def reshape(x, shape):
    x = as_tensor(x)
    old = x.shape
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def reduce_sum(x, axis=None):
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return make_result(np.asarray(x.data.sum(axis=axis)), (x,), backward)


def reduce_mean(x, axis=None):
    x = as_tensor(x)
    n = x.data.size if axis is None else x.shape[axis]
    return scale(reduce_sum(x, axis), 1.0 / n)


def function(x, value, grad_fn):
    """Custom node: ``value`` computed outside the tape, ``grad_fn(g)`` gives d/dx."""
    x = as_tensor(x)
    return make_result(np.asarray(value, dtype=x.dtype), (x,), lambda g: (grad_fn(g),))


__all__ = [
    "MASK_VALUE", "Tensor", "add", "sub", "mul", "scale", "matmul", "transpose", "relu",
    "sigmoid", "exp", "log", "row_softmax", "key_mask", "layer_norm", "dropout", "concat",
    "slice", "reshape", "reduce_sum", "reduce_mean", "function",
]
