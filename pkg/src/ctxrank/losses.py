"""Ranking objectives as differentiable functions of (scores, labels, mask).

Every loss takes raw model outputs as a :class:`~ctxrank.nn.Tensor` (or an
array) of shape (B, l) -- (B, l, n_levels - 1) for the ordinal loss -- plus
integer ``labels`` and boolean ``mask`` of shape (B, l). Single slates of
shape (l,) are accepted too. The value is computed per slate and averaged
over slates; the gradient w.r.t. the outputs is written out analytically.

Rank-dependent weights of the LambdaLoss family (ranks, maxDCG) are computed
from the current scores but treated as constants when differentiating.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AllMasked, BinaryWithNoClicks, ConfigMismatch, LabelOutOfRange
from .nn import ops
from .nn.tensor import as_tensor

LN2 = math.log(2.0)
KINDS = ("rmse", "ordinal", "ranknet", "lambdarank", "ndcgloss2pp", "listnet", "listmle")


@dataclass
class LossSpec:
    kind: str = "ordinal"
    sigma: float = 1.0
    mu: float = 10.0
    n_levels: int = 5
    binary_listnet: bool = False
    max_grade: float | None = None

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigMismatch(f"unknown loss {self.kind!r}; choose from {KINDS}")
        if self.sigma <= 0:
            raise ConfigMismatch("sigma must be > 0")
        if self.mu < 0:
            raise ConfigMismatch("mu must be >= 0")
        if self.n_levels < 2:
            raise ConfigMismatch("n_levels must be >= 2")
        return self

    @property
    def output_dim(self):
        return self.n_levels - 1 if self.kind == "ordinal" else 1

    @property
    def grade_ceiling(self):
        return float(self.n_levels - 1 if self.max_grade is None else self.max_grade)


def _prepare(outputs, labels, mask, trailing=0):
    out = as_tensor(outputs)
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    squeeze_to = out.ndim - trailing
    if squeeze_to == 1:
        out = ops.reshape(out, (1,) + out.shape)
        labels, mask = labels[None], mask[None]
    if out.shape[:2] != labels.shape or labels.shape != mask.shape:
        raise ValueError(f"outputs {out.shape}, labels {labels.shape}, mask {mask.shape} disagree")
    if not mask.any(axis=1).all():
        raise AllMasked("every slate needs at least one unmasked item")
    return out, labels, mask


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return ops._sigmoid(_promote(z))


def _promote(a):
    # at least float64; longdouble passes through for extended-precision checks
    a = np.asarray(a)
    return a.astype(np.result_type(a.dtype, np.float64), copy=False)


# pointwise ---------------------------------------------------------------

def rmse_loss(scores, labels, mask, max_grade=4.0):
    """Per slate ``sqrt(sum_i (y_i - max_grade * sigmoid(score_i))**2)`` over real items."""
    z, labels, mask = _prepare(scores, labels, mask)
    zd = _promote(z.data)
    sig = _sigmoid(zd)
    resid = np.where(mask, max_grade * sig - labels, 0.0)
    per_slate = np.sqrt((resid ** 2).sum(axis=1))
    b = len(per_slate)

    def grad(g):
        safe = np.where(per_slate > 0, per_slate, 1.0)[:, None]
        d = np.where(per_slate[:, None] > 0, resid / safe, 0.0) * max_grade * sig * (1 - sig)
        return (g * d / b).astype(z.dtype)

    return ops.function(z, per_slate.mean(), grad)


def ordinal_encode(label, n_levels=5):
    """Cumulative target: grade ``g`` becomes ``g`` ones followed by zeros."""
    label = int(label)
    if not 0 <= label < n_levels:
        raise LabelOutOfRange(f"label {label} outside [0, {n_levels - 1}]")
    bits = np.zeros(n_levels - 1, dtype=np.int64)
    bits[:label] = 1
    return bits


def ordinal_decode(bits):
    """Inverse of :func:`ordinal_encode`; rejects non-cumulative patterns."""
    bits = np.asarray(bits)
    g = int(bits.sum())
    if not (bits[:g] == 1).all():
        raise ValueError(f"{bits.tolist()} is not a cumulative ordinal encoding")
    return g


def ordinal_targets(labels, n_levels=5):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() > n_levels - 1):
        raise LabelOutOfRange(f"labels must lie in [0, {n_levels - 1}]")
    return (labels[..., None] > np.arange(n_levels - 1)).astype(np.float64)


def ordinal_score(outputs):
    """Inference score per item: the sum of the sigmoided level outputs."""
    out = outputs.data if hasattr(outputs, "data") else np.asarray(outputs)
    return _sigmoid(out).sum(axis=-1)


def ordinal_loss(outputs, labels, mask, n_levels=5):
    """Mean binary cross-entropy over real items and levels, per slate."""
    z, labels, mask = _prepare(outputs, labels, mask, trailing=1)
    k = n_levels - 1
    if z.shape[-1] != k:
        raise ConfigMismatch(f"ordinal loss expects {k} outputs per item, got {z.shape[-1]}")
    zd = _promote(z.data)
    t = ordinal_targets(np.where(mask, labels, 0), n_levels)
    bce = _softplus(zd) - t * zd
    weight = mask[..., None] / (mask.sum(axis=1)[:, None, None] * k)
    per_slate = (bce * weight).sum(axis=(1, 2))
    b = len(per_slate)
    return ops.function(z, per_slate.mean(),
                        lambda g: (g * (_sigmoid(zd) - t) * weight / b).astype(z.dtype))


# pairwise ----------------------------------------------------------------

def discount(rank):
    """``log2(1 + rank)`` for 1-based ranks."""
    return np.log2(1.0 + np.asarray(rank, dtype=np.float64))


def descending_ranks(s):
    """1-based positions in the descending-score order; ties keep index order."""
    order = np.argsort(-s, kind="stable")
    ranks = np.empty(len(s), dtype=np.int64)
    ranks[order] = np.arange(1, len(s) + 1)
    return ranks


def max_dcg(y):
    gains = np.sort(2.0 ** np.asarray(y, dtype=np.float64) - 1.0)[::-1]
    best = float((gains / discount(np.arange(1, len(gains) + 1))).sum())
    return best if best > 0 else 1.0


def pair_weights(s, y, kind, mu=10.0):
    """Weight matrix ``w[i, j]`` for the ``y_i > y_j`` pairs of one slate."""
    n = len(s)
    if kind == "ranknet":
        return np.ones((n, n))
    r = descending_ranks(s)
    inv_d = 1.0 / discount(r)
    g = (2.0 ** y.astype(np.float64) - 1.0) / max_dcg(y)
    dgain = np.abs(g[:, None] - g[None, :])
    rho = np.abs(inv_d[:, None] - inv_d[None, :])
    if kind == "lambdarank":
        return dgain * rho
    gap = np.abs(r[:, None] - r[None, :])
    safe_gap = np.where(gap > 0, gap, 1)
    delta = np.where(gap > 0, np.abs(1.0 / discount(safe_gap) - 1.0 / discount(safe_gap + 1)), 0.0)
    return (rho + mu * delta) * dgain


def pairwise_weighted_loss(scores, labels, mask, kind="ranknet", sigma=1.0, mu=10.0):
    """``-sum_{y_i > y_j} w_ij * log2(sigmoid(sigma * (s_i - s_j)))`` per slate.

    ``kind`` picks the weights: ``ranknet`` (1), ``lambdarank``
    (``|G_i - G_j| rho_ij``) or ``ndcgloss2pp`` (``(rho_ij + mu delta_ij) |G_i - G_j|``).
    """
    if kind not in ("ranknet", "lambdarank", "ndcgloss2pp"):
        raise ConfigMismatch(f"not a pairwise loss: {kind!r}")
    z, labels, mask = _prepare(scores, labels, mask)
    zd = _promote(z.data)
    values = np.zeros(len(zd))
    grads = np.zeros_like(zd)
    for b in range(len(zd)):
        idx = np.flatnonzero(mask[b])
        s, y = zd[b, idx], labels[b, idx]
        pairs = y[:, None] > y[None, :]
        if not pairs.any():
            continue
        w = np.where(pairs, pair_weights(s, y, kind, mu), 0.0)
        diff = sigma * (s[:, None] - s[None, :])
        values[b] = (w * _softplus(-diff)).sum() / LN2
        c = -w * sigma * _sigmoid(-diff) / LN2
        grads[b, idx] = c.sum(axis=1) - c.sum(axis=0)
    n = len(zd)
    return ops.function(z, values.mean(), lambda g: (g * grads / n).astype(z.dtype))


def ranknet_loss(scores, labels, mask, sigma=1.0):
    return pairwise_weighted_loss(scores, labels, mask, "ranknet", sigma)


def lambdarank_loss(scores, labels, mask, sigma=1.0):
    return pairwise_weighted_loss(scores, labels, mask, "lambdarank", sigma)


def ndcgloss2pp_loss(scores, labels, mask, sigma=1.0, mu=10.0):
    return pairwise_weighted_loss(scores, labels, mask, "ndcgloss2pp", sigma, mu)


# listwise ----------------------------------------------------------------

def _masked_log_softmax(x, mask):
    xm = np.where(mask, x, -np.inf)
    top = xm.max(axis=1, keepdims=True)
    lse = top + np.log(np.exp(xm - top).sum(axis=1, keepdims=True))
    return np.where(mask, xm - lse, 0.0)


def listnet_loss(scores, labels, mask, binary=False):
    """Cross-entropy between a label distribution and ``softmax(scores)``.

    Graded mode uses ``softmax(labels)`` as the target; binary mode uses
    ``clicks / sum(clicks)``. In binary mode slates without clicks are
    skipped with a warning; if no slate has a click, BinaryWithNoClicks.
    """
    z, labels, mask = _prepare(scores, labels, mask)
    zd = _promote(z.data)
    y = labels.astype(np.float64)
    if binary:
        clicks = np.where(mask, y, 0.0)
        totals = clicks.sum(axis=1)
        used = totals > 0
        if not used.any():
            raise BinaryWithNoClicks("no slate in the batch has a click")
        if not used.all():
            warnings.warn(f"binary ListNet skipped {int((~used).sum())} slate(s) without clicks",
                          RuntimeWarning, stacklevel=2)
        target = clicks / np.where(used, totals, 1.0)[:, None]
    else:
        used = np.ones(len(zd), dtype=bool)
        target = np.exp(_masked_log_softmax(y, mask)) * mask
    logp = _masked_log_softmax(zd, mask)
    per_slate = -(target * logp).sum(axis=1)
    n = int(used.sum())
    p = np.exp(logp) * mask
    grad = np.where(used[:, None], p - target, 0.0)
    return ops.function(z, per_slate[used].sum() / n, lambda g: (g * grad / n).astype(z.dtype))


def listmle_order(labels, rng):
    """Label-descending permutation with ties broken uniformly at random."""
    labels = np.asarray(labels)
    shuffled = rng.permutation(len(labels))
    return shuffled[np.argsort(-labels[shuffled], kind="stable")]


def listmle_loss(scores, labels, mask, rng=None):
    """Plackett-Luce negative log-likelihood of the label-sorted permutation."""
    z, labels, mask = _prepare(scores, labels, mask)
    rng = rng if rng is not None else np.random.default_rng(0)
    zd = _promote(z.data)
    values = np.zeros(len(zd))
    grads = np.zeros_like(zd)
    for b in range(len(zd)):
        idx = np.flatnonzero(mask[b])
        perm = idx[listmle_order(labels[b, idx], rng)]
        s = zd[b, perm]
        lse = np.logaddexp.accumulate(s[::-1])[::-1]
        values[b] = (lse - s).sum()
        # p[i, k] = P(item k picked at step i), k >= i
        upper = np.triu(np.ones((len(s), len(s)), dtype=bool))
        p = np.exp(np.where(upper, s[None, :] - lse[:, None], -np.inf))
        grads[b, perm] = p.sum(axis=0) - 1.0
    n = len(zd)
    return ops.function(z, values.mean(), lambda g: (g * grads / n).astype(z.dtype))


# dispatch ----------------------------------------------------------------

def compute_loss(spec, outputs, labels, mask, rng=None):
    kind = spec.kind
    if kind == "rmse":
        return rmse_loss(outputs, labels, mask, spec.grade_ceiling)
    if kind == "ordinal":
        return ordinal_loss(outputs, labels, mask, spec.n_levels)
    if kind in ("ranknet", "lambdarank", "ndcgloss2pp"):
        return pairwise_weighted_loss(outputs, labels, mask, kind, spec.sigma, spec.mu)
    if kind == "listnet":
        return listnet_loss(outputs, labels, mask, spec.binary_listnet)
    if kind == "listmle":
        return listmle_loss(outputs, labels, mask, rng)
    raise ConfigMismatch(f"unknown loss {kind!r}")
