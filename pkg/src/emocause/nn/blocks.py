"""Reusable model blocks built from the differentiable primitives."""

from __future__ import annotations

import numpy as np

from . import ops
from .autograd import Tensor

MASKED = -1e9


def sinusoidal_positions(length: int, dim: int, dtype=np.float32) -> np.ndarray:
    """Fixed sin/cos position table of shape (length, dim)."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(dim // 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / dim)
    pe = np.zeros((length, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe.astype(dtype)


def causal_bias(length: int, dtype=np.float32) -> np.ndarray:
    bias = np.zeros((length, length), dtype=dtype)
    bias[np.triu_indices(length, k=1)] = MASKED
    return bias


def padding_bias(real_mask: np.ndarray, dtype=np.float32) -> np.ndarray:
    """(1, Tk) additive bias masking padded key positions."""
    return np.where(real_mask, 0.0, MASKED).astype(dtype)[None, :]


def multi_head_attention(
    q_in: Tensor,
    kv_in: Tensor,
    p,
    prefix: str,
    heads: int,
    mask_bias: np.ndarray | None = None,
) -> Tensor:
    """Scaled dot-product attention with per-head dimension from the weights."""
    tq = q_in.data.shape[0]
    tk = kv_in.data.shape[0]
    inner = p[f"{prefix}.wq"].data.shape[1]
    dh = inner // heads

    def split(x):
        return ops.transpose(ops.reshape(x, (-1, heads, dh)), (1, 0, 2))

    q = split(ops.affine(q_in, p[f"{prefix}.wq"], p[f"{prefix}.bq"]))
    # no key bias: softmax cancels a constant shift over keys, so it would
    # be dead weight (and an exact-zero gradient that trips FD checks)
    k = split(ops.affine(kv_in, p[f"{prefix}.wk"]))
    v = split(ops.affine(kv_in, p[f"{prefix}.wv"], p[f"{prefix}.bv"]))
    scores = ops.scale(ops.matmul(q, ops.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(dh))
    if mask_bias is not None:
        scores = ops.add(scores, ops.as_constant(mask_bias, dtype=scores.dtype))
    attn = ops.softmax(scores)
    mixed = ops.matmul(attn, v)  # (heads, tq, dh)
    merged = ops.reshape(ops.transpose(mixed, (1, 0, 2)), (tq, inner))
    del tk
    return ops.affine(merged, p[f"{prefix}.wo"], p[f"{prefix}.bo"])


def conv_feed_forward(x: Tensor, p, prefix: str, padding: str = "both") -> Tensor:
    """Two width-3 convolutions with a ReLU, replacing the dense FFN.

    Decoder layers use left (causal) padding so position t never sees
    positions after t.
    """
    h = ops.relu(ops.conv1d_w3(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"], padding))
    return ops.conv1d_w3(h, p[f"{prefix}.w2"], p[f"{prefix}.b2"], padding)


def _keep(x: Tensor, keep_mask: np.ndarray | None) -> Tensor:
    if keep_mask is None:
        return x
    return ops.mul(x, ops.as_constant(keep_mask[:, None], dtype=x.dtype))


def encoder_layer(x: Tensor, p, prefix: str, heads: int,
                  key_bias: np.ndarray | None,
                  keep_mask: np.ndarray | None) -> Tensor:
    a = multi_head_attention(x, x, p, f"{prefix}.attn", heads, key_bias)
    x = ops.layer_norm(ops.add(x, a), p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"])
    x = _keep(x, keep_mask)
    f = conv_feed_forward(x, p, f"{prefix}.conv")
    x = ops.layer_norm(ops.add(x, f), p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"])
    return _keep(x, keep_mask)


def decoder_layer(x: Tensor, memory: Tensor, p, prefix: str, heads: int,
                  self_bias: np.ndarray, memory_bias: np.ndarray | None) -> Tensor:
    a = multi_head_attention(x, x, p, f"{prefix}.self", heads, self_bias)
    x = ops.layer_norm(ops.add(x, a), p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"])
    c = multi_head_attention(x, memory, p, f"{prefix}.cross", heads, memory_bias)
    x = ops.layer_norm(ops.add(x, c), p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"])
    f = conv_feed_forward(x, p, f"{prefix}.conv", padding="left")
    return ops.layer_norm(ops.add(x, f), p[f"{prefix}.ln3.g"], p[f"{prefix}.ln3.b"])


def gru_cell(x: Tensor, h: Tensor, p, prefix: str) -> Tensor:
    """Gated recurrent unit step; rows are (1, d) states.

    With all-zero weights this reduces to 0.5 * h (update gate at
    sigmoid(0), candidate tanh(0) = 0).
    """
    z = ops.sigmoid(ops.add(
        ops.add(ops.matmul(x, p[f"{prefix}.wz"]), ops.matmul(h, p[f"{prefix}.uz"])),
        p[f"{prefix}.bz"]))
    r = ops.sigmoid(ops.add(
        ops.add(ops.matmul(x, p[f"{prefix}.wr"]), ops.matmul(h, p[f"{prefix}.ur"])),
        p[f"{prefix}.br"]))
    n = ops.tanh(ops.add(
        ops.add(ops.matmul(x, p[f"{prefix}.wn"]),
                ops.matmul(ops.mul(r, h), p[f"{prefix}.un"])),
        p[f"{prefix}.bn"]))
    # h' = (1 - z) * n + z * h, written as n + z * (h - n)
    return ops.add(n, ops.mul(z, ops.sub(h, n)))


def gru_sequence(inputs, h0: Tensor, p, prefix: str) -> Tensor:
    """Final hidden state after consuming ``inputs`` (list of (1, d) rows)."""
    h = h0
    for x in inputs:
        h = gru_cell(x, h, p, prefix)
    return h
