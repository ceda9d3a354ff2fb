"""Transformer context encoder with causal and dialogue-state embeddings,
plus the auxiliary emotion classifier head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CLS_ID, PAD_ID
from .nn import Tensor, blocks, ops

STATE_TAG_IDS = {"cls": 0, "situation": 1, "speaker": 2, "listener": 3}


@dataclass
class EncodedContext:
    states: Tensor               # (Lc, d_model)
    cls_state: Tensor            # (1, d_model)
    real_mask: np.ndarray        # (Lc,) bool, False at PAD positions


def encode_context(token_ids, bucket_ids, state_ids, p, n_layers: int,
                   n_heads: int, dtype=np.float32,
                   real_mask=None) -> EncodedContext:
    """Token + frozen causal + dialogue-state embeddings with sinusoidal
    positions through a post-norm transformer stack.

    Padded positions (``real_mask`` False, default: PAD tokens) are
    excluded from attention keys and zeroed between sublayers so they can
    never leak into real positions.
    """
    token_ids = np.asarray(token_ids, dtype=np.int64)
    bucket_ids = np.asarray(bucket_ids, dtype=np.int64)
    state_ids = np.asarray(state_ids, dtype=np.int64)
    if not (len(token_ids) == len(bucket_ids) == len(state_ids)):
        raise ValueError(
            f"length mismatch: {len(token_ids)} tokens, {len(bucket_ids)} "
            f"buckets, {len(state_ids)} state tags"
        )
    if len(token_ids) == 0 or token_ids[0] != CLS_ID:
        raise ValueError("context must start with CLS")

    length = len(token_ids)
    e = ops.add(
        ops.add(ops.embedding(p["emb.tok"], token_ids),
                ops.embedding(p["emb.cas"], bucket_ids)),
        ops.embedding(p["emb.utt"], state_ids),
    )
    pe = blocks.sinusoidal_positions(length, e.data.shape[1], dtype=dtype)
    e = ops.add(e, ops.as_constant(pe))

    if real_mask is None:
        real_mask = token_ids != PAD_ID
    real_mask = np.asarray(real_mask, dtype=bool)
    keep = real_mask.astype(dtype)
    key_bias = blocks.padding_bias(real_mask, dtype=dtype)
    x = ops.mul(e, ops.as_constant(keep[:, None]))
    for i in range(n_layers):
        x = blocks.encoder_layer(x, p, f"enc.l{i}", n_heads, key_bias, keep)
    return EncodedContext(states=x, cls_state=ops.rows(x, 0, 1), real_mask=real_mask)


def predict_emotion(encoded: EncodedContext, p) -> Tensor:
    """Softmax distribution over the emotion classes from the CLS state."""
    logits = ops.matmul(encoded.cls_state, p["emo.w"])
    return ops.reshape(ops.softmax(logits), (logits.data.shape[1],))
