"""Context-aware self-attention scorer and the per-item MLP baseline.

Both scorers take a batch of equal-length slates ``features`` (B, l, d_f)
with a validity ``mask`` (B, l) and return raw outputs of shape (B, l) or
(B, l, output_dim). Item scores used for ranking come from
:meth:`ranking_scores`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigMismatch, OddDimension, ShapeMismatch
from .nn import Parameter, Tensor, no_grad, ops


@dataclass
class ModelConfig:
    d_f: int | None = None
    d_fc: int = 64
    N: int = 2
    H: int = 2
    d_h: int = 64
    d_ff: int | None = None
    p_drop: float = 0.1
    use_positional_encoding: bool = False
    output_dim: int = 1
    kind: str = "context"
    mlp_hidden: list | None = None

    @property
    def ff_width(self):
        return self.d_h if self.d_ff is None else self.d_ff

    @property
    def d_k(self):
        return self.d_h // self.H

    def validate(self):
        dims = {"d_f": self.d_f, "d_fc": self.d_fc, "N": self.N, "H": self.H,
                "d_h": self.d_h, "d_ff": self.ff_width, "output_dim": self.output_dim}
        for name, v in dims.items():
            if v is None or int(v) != v or v < 1:
                raise ConfigMismatch(f"{name} must be a positive integer, got {v!r}")
        if self.d_h % self.H:
            raise ConfigMismatch(f"d_h={self.d_h} is not divisible by H={self.H}")
        if not 0.0 <= self.p_drop < 1.0:
            raise ConfigMismatch(f"p_drop must lie in [0, 1), got {self.p_drop}")
        if self.use_positional_encoding and self.d_h % 2:
            raise OddDimension(f"positional encodings need an even d_h, got {self.d_h}")
        if self.kind not in ("context", "mlp"):
            raise ConfigMismatch(f"model kind must be 'context' or 'mlp', got {self.kind!r}")
        return self


def positional_encoding(l, d):
    """Fixed sinusoidal table: even columns ``sin(pos / 10000**(2i/d))``,
    odd columns the matching cosine."""
    if d % 2:
        raise OddDimension(f"positional encoding width must be even, got {d}")
    pos = np.arange(l, dtype=np.float64)[:, None]
    freq = 10000.0 ** (np.arange(0, d, 2, dtype=np.float64) / d)
    pe = np.zeros((l, d))
    pe[:, 0::2] = np.sin(pos / freq)
    pe[:, 1::2] = np.cos(pos / freq)
    return pe


def glorot(rng, fan_in, fan_out, dtype, name):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Parameter(rng.uniform(-limit, limit, size=(fan_in, fan_out)), name=name, dtype=dtype)


class Linear:
    def __init__(self, rng, d_in, d_out, dtype, name, bias=True):
        self.weight = glorot(rng, d_in, d_out, dtype, f"{name}.weight")
        self.bias = Parameter(np.zeros(d_out), name=f"{name}.bias", dtype=dtype) if bias else None

    def __call__(self, x):
        out = ops.matmul(x, self.weight)
        return out if self.bias is None else ops.add(out, self.bias)

    def parameters(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])


class LayerNorm:
    def __init__(self, d, dtype, name, eps=1e-6):
        self.gain = Parameter(np.ones(d), name=f"{name}.gain", dtype=dtype)
        self.bias = Parameter(np.zeros(d), name=f"{name}.bias", dtype=dtype)
        self.eps = eps

    def __call__(self, x):
        return ops.layer_norm(x, self.gain, self.bias, self.eps)

    def parameters(self):
        return [self.gain, self.bias]


def scaled_dot_product_attention(q, k, v, mask=None):
    """``softmax(q k^T / sqrt(d_k)) v`` with padded keys hidden by ``mask``.

    ``q``, ``k``, ``v`` are (..., l, d_k) tensors; ``mask`` is a boolean
    (..., l) validity array (True = real item). Returns the output and the
    attention weights.
    """
    q, k, v = ops.as_tensor(q), ops.as_tensor(k), ops.as_tensor(v)
    if not (q.shape[:-1] == k.shape[:-1] == v.shape[:-1]) or q.shape[-1] != k.shape[-1]:
        raise ShapeMismatch(f"attention: q {q.shape}, k {k.shape}, v {v.shape}")
    logits = ops.scale(ops.matmul(q, ops.transpose(k)), 1.0 / math.sqrt(q.shape[-1]))
    additive = None
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != q.shape[:-1]:
            raise ShapeMismatch(f"attention mask {mask.shape} does not match {q.shape[:-1]}")
        additive = ops.key_mask(mask, q.dtype)
    weights = ops.row_softmax(logits, additive)
    return ops.matmul(weights, v), weights


class MultiHeadAttention:
    """H heads, each with its own d_h x d_k projections (stored side by side)."""

    def __init__(self, rng, d_h, H, dtype, name):
        if d_h % H:
            raise ConfigMismatch(f"d_h={d_h} is not divisible by H={H}")
        self.H, self.d_k = H, d_h // H
        self.w_q = glorot(rng, d_h, d_h, dtype, f"{name}.w_q")
        self.w_k = glorot(rng, d_h, d_h, dtype, f"{name}.w_k")
        self.w_v = glorot(rng, d_h, d_h, dtype, f"{name}.w_v")
        self.w_o = glorot(rng, d_h, d_h, dtype, f"{name}.w_o")

    def __call__(self, x, mask):
        return multi_head_attention(x, self, mask)

    def parameters(self):
        return [self.w_q, self.w_k, self.w_v, self.w_o]


def multi_head_attention(x, params, mask):
    x = ops.as_tensor(x)
    d_h = params.H * params.d_k
    if x.shape[-1] != d_h:
        raise ShapeMismatch(f"multi-head attention expects width {d_h}, got {x.shape}")
    q = ops.matmul(x, params.w_q)
    k = ops.matmul(x, params.w_k)
    v = ops.matmul(x, params.w_v)
    heads = []
    for h in range(params.H):
        lo, hi = h * params.d_k, (h + 1) * params.d_k
        out, _ = scaled_dot_product_attention(
            ops.slice(q, lo, hi), ops.slice(k, lo, hi), ops.slice(v, lo, hi), mask)
        heads.append(out)
    merged = heads[0] if params.H == 1 else ops.concat(heads, axis=-1)
    return ops.matmul(merged, params.w_o)


class EncoderBlock:
    def __init__(self, rng, d_h, H, d_ff, p_drop, dtype, name):
        self.attention = MultiHeadAttention(rng, d_h, H, dtype, f"{name}.attn")
        self.norm1 = LayerNorm(d_h, dtype, f"{name}.norm1")
        self.ff_in = Linear(rng, d_h, d_ff, dtype, f"{name}.ff_in")
        self.ff_out = Linear(rng, d_ff, d_h, dtype, f"{name}.ff_out")
        self.norm2 = LayerNorm(d_h, dtype, f"{name}.norm2")
        self.p_drop = p_drop

    def __call__(self, x, mask, mode="eval", rng=None):
        return encoder_block(x, self, mask, mode, rng)

    def parameters(self):
        return (self.attention.parameters() + self.norm1.parameters()
                + self.ff_in.parameters() + self.ff_out.parameters() + self.norm2.parameters())


def encoder_block(x, block, mask, mode="eval", rng=None):
    """``z = LN(x + Drop(MHA(x)))``; ``out = LN(z + Drop(FF(z)))``."""
    attended = block.attention(x, mask)
    z = block.norm1(ops.add(x, ops.dropout(attended, block.p_drop, mode, rng)))
    ff = block.ff_out(ops.relu(block.ff_in(z)))
    return block.norm2(ops.add(z, ops.dropout(ff, block.p_drop, mode, rng)))


class _Scorer:
    config: ModelConfig

    def parameters(self):
        raise NotImplementedError

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    def n_parameters(self):
        return sum(p.data.size for p in self.parameters())

    def state_dict(self):
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, state):
        params = self.named_parameters()
        missing = set(params) - set(state)
        if missing:
            raise ConfigMismatch(f"checkpoint lacks parameters: {sorted(missing)}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ConfigMismatch(f"{name}: checkpoint shape {value.shape} != {p.shape}")
            p.data = value.astype(p.dtype)

    def _check_input(self, features, mask):
        features = np.asarray(features)
        if features.ndim == 2:
            features, mask = features[None], np.asarray(mask)[None]
        if features.shape[-1] != self.config.d_f:
            raise ConfigMismatch(f"model expects d_f={self.config.d_f}, got {features.shape[-1]}")
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != features.shape[:2]:
            raise ShapeMismatch(f"mask {mask.shape} vs features {features.shape}")
        return Tensor(features, dtype=self.dtype), mask

    def ranking_scores(self, outputs):
        """Per-item ranking scores from raw outputs; multi-output heads
        (ordinal) are sigmoided and summed."""
        out = outputs.data if isinstance(outputs, Tensor) else np.asarray(outputs)
        if out.ndim == 3:
            return ops._sigmoid(out).sum(axis=-1)
        return out

    def predict(self, features, mask):
        with no_grad():
            out = self(features, mask, mode="eval")
        return self.ranking_scores(out)

    def _squeeze(self, out):
        return ops.reshape(out, out.shape[:-1]) if self.config.output_dim == 1 else out


class ContextAwareRanker(_Scorer):
    """``FC(Encoder^N(FC(x)))`` with optional sinusoidal position signal."""

    def __init__(self, config, rng, dtype=np.float64):
        self.config = config.validate()
        self.dtype = np.dtype(dtype)
        c = config
        self.input_fc = Linear(rng, c.d_f, c.d_fc, dtype, "input_fc")
        self.adapter = Linear(rng, c.d_fc, c.d_h, dtype, "adapter") if c.d_fc != c.d_h else None
        self.blocks = [EncoderBlock(rng, c.d_h, c.H, c.ff_width, c.p_drop, dtype, f"block{i}")
                       for i in range(c.N)]
        self.scoring_fc = Linear(rng, c.d_h, c.output_dim, dtype, "scoring_fc")

    def parameters(self):
        params = self.input_fc.parameters()
        if self.adapter is not None:
            params += self.adapter.parameters()
        for block in self.blocks:
            params += block.parameters()
        return params + self.scoring_fc.parameters()

    def __call__(self, features, mask, mode="eval", rng=None):
        x, mask = self._check_input(features, mask)
        h = self.input_fc(x)
        if self.adapter is not None:
            h = self.adapter(h)
        if self.config.use_positional_encoding:
            h = ops.add(h, Tensor(positional_encoding(h.shape[-2], h.shape[-1]), dtype=self.dtype))
        for block in self.blocks:
            h = block(h, mask, mode, rng)
        return self._squeeze(self.scoring_fc(h))


def context_parameter_count(config):
    c = config
    n = c.d_f * c.d_fc + c.d_fc
    if c.d_fc != c.d_h:
        n += c.d_fc * c.d_h + c.d_h
    per_block = 4 * c.d_h * c.d_h + 4 * c.d_h + 2 * c.d_h * c.ff_width + c.ff_width + c.d_h
    return n + c.N * per_block + c.d_h * c.output_dim + c.output_dim


class MlpBaseline(_Scorer):
    """Per-item feed-forward scorer: relu hidden layers with dropout, linear head."""

    def __init__(self, config, rng, dtype=np.float64):
        self.config = config.validate()
        self.dtype = np.dtype(dtype)
        widths = config.mlp_hidden or matched_mlp_widths(config)
        self.widths = [int(w) for w in widths]
        dims = [config.d_f] + self.widths
        self.layers = [Linear(rng, a, b, dtype, f"mlp{i}") for i, (a, b) in enumerate(zip(dims, dims[1:]))]
        self.head = Linear(rng, dims[-1], config.output_dim, dtype, "mlp_head")

    def parameters(self):
        params = []
        for layer in self.layers:
            params += layer.parameters()
        return params + self.head.parameters()

    def __call__(self, features, mask, mode="eval", rng=None):
        h, _ = self._check_input(features, mask)
        for layer in self.layers:
            h = ops.dropout(ops.relu(layer(h)), self.config.p_drop, mode, rng)
        return self._squeeze(self.head(h))


def mlp_parameter_count(d_f, widths, output_dim=1):
    dims = [d_f] + list(widths) + [output_dim]
    return sum(a * b + b for a, b in zip(dims, dims[1:]))


def matched_mlp_widths(config, depth=3):
    """Equal hidden widths whose MLP parameter count is closest to the
    context-aware model built from the same config."""
    target = context_parameter_count(config)
    best = min(range(1, 4097),
               key=lambda w: abs(mlp_parameter_count(config.d_f, [w] * depth, config.output_dim) - target))
    return [best] * depth


def build_model(config, rng, dtype=np.float64):
    if config.kind == "mlp":
        return MlpBaseline(config, rng, dtype)
    return ContextAwareRanker(config, rng, dtype)


def score_slate(model, slate, mode="eval", rng=None):
    """Raw outputs for one slate as a numpy array (padded positions included)."""
    with no_grad():
        out = model(slate.features, slate.mask, mode, rng)
    return out.data[0]


def score_slate_mlp(baseline, slate, mode="eval", rng=None):
    if not isinstance(baseline, MlpBaseline):
        raise ConfigMismatch("score_slate_mlp needs an MlpBaseline")
    return score_slate(baseline, slate, mode, rng)
