"""Response decoder: causality-vector fusion, transformer decoding, score
propagation over graph concepts, and the gated pointer/generic mixture."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .context import EncodedContext
from .data import UNK_ID, Vocabulary
from .gcn import EncodedGraphs
from .nn import Tensor, blocks, ops


def fuse_causality(pooled, p, d_model: int, dtype=np.float32) -> Tensor:
    """Bidirectional GRU over per-graph pooled vectors, then a
    sigmoid-activated projection.  An empty list yields the zero vector."""
    if not pooled:
        return ops.as_constant(np.zeros((1, d_model), dtype=dtype))
    d_gru = p["fuse.fw.uz"].data.shape[0]
    h0 = ops.as_constant(np.zeros((1, d_gru), dtype=dtype))
    fwd = blocks.gru_sequence(pooled, h0, p, "fuse.fw")
    bwd = blocks.gru_sequence(list(reversed(pooled)), h0, p, "fuse.bw")
    final = ops.concat([fwd, bwd], axis=1)
    return ops.sigmoid(ops.matmul(final, p["fuse.wg"]))


def decoder_states(prefix_ids, encoded: EncodedContext, h_q: Tensor, p,
                   n_layers: int, n_heads: int, max_len: int,
                   dtype=np.float32) -> Tensor:
    """Masked transformer decoder over the whole prefix.

    Position 0 carries emb(SOS) + the causality vector; the causal mask
    makes row t of the result identical to running the decoder on the
    prefix truncated after t.
    """
    prefix_ids = np.asarray(prefix_ids, dtype=np.int64)
    t = len(prefix_ids)
    if t == 0:
        raise ValueError("decoder prefix must start with SOS")
    if t > max_len:
        raise ValueError(f"prefix length {t} exceeds maximum {max_len}")
    e = ops.embedding(p["emb.tok"], prefix_ids)
    d_model = e.data.shape[1]
    if t > 1:
        pad = ops.as_constant(np.zeros((t - 1, d_model), dtype=dtype))
        hq_block = ops.concat([h_q, pad], axis=0)
    else:
        hq_block = h_q
    x = ops.add(e, hq_block)
    x = ops.add(x, ops.as_constant(blocks.sinusoidal_positions(t, d_model, dtype)))
    self_bias = blocks.causal_bias(t, dtype=dtype)
    mem_bias = blocks.padding_bias(encoded.real_mask, dtype=dtype)
    for i in range(n_layers):
        x = blocks.decoder_layer(x, encoded.states, p, f"dec.l{i}", n_heads,
                                 self_bias, mem_bias)
    return x


def decoder_step(prefix_ids, encoded: EncodedContext, h_q: Tensor, p,
                 n_layers: int, n_heads: int, max_len: int,
                 dtype=np.float32) -> Tensor:
    """State at the last prefix position."""
    states = decoder_states(prefix_ids, encoded, h_q, p, n_layers, n_heads,
                            max_len, dtype=dtype)
    t = states.data.shape[0]
    return ops.rows(states, t - 1, t)


def generic_distribution(states: Tensor, p) -> Tensor:
    """Softmax over the standard vocabulary, one row per decoder state."""
    return ops.softmax(ops.affine(states, p["dec.wvoc"], p["dec.bvoc"]))


def triple_relevance(h_triple: Tensor, state: Tensor, p) -> Tensor:
    """Sigmoid bilinear compatibility of one triple with one decoder state."""
    proj = ops.matmul(h_triple, p["point.wrel"])
    return ops.sigmoid(ops.matmul(proj, ops.transpose(state, (1, 0))))


def propagate_scores(enc: EncodedGraphs, states: Tensor, gamma: float, p) -> Tensor:
    """Raw per-node evidence scores, one column per decoder step.

    Depth-0 nodes score 1; deeper nodes mean-aggregate
    gamma * parent score + relevance over in-edges (other endpoint at a
    smaller depth).  Scores for the same token are summed later, across
    graphs, by the concept distribution.
    """
    topo = enc.topo
    t_steps = states.data.shape[0]
    if len(topo.in_parent):
        proj = ops.matmul(enc.prop_triples, p["point.wrel"])
        relevance = ops.sigmoid(ops.matmul(proj, ops.transpose(states, (1, 0))))
    else:
        relevance = ops.as_constant(
            np.zeros((0, t_steps), dtype=states.data.dtype))
    return ops.propagate(relevance, topo.order, topo.depths, topo.in_ptr,
                         topo.in_parent, gamma)


def concept_distribution(scores: Tensor, tokens) -> tuple[Tensor, list[str]]:
    """Softmax over distinct concept tokens of per-token summed scores.

    scores: (N, T) node scores; returns ((T, m) distribution, m tokens).
    """
    if not tokens:
        raise ValueError("concept distribution requires at least one concept")
    distinct = sorted(set(tokens))
    pos = {tok: i for i, tok in enumerate(distinct)}
    m = np.zeros((len(distinct), len(tokens)), dtype=scores.data.dtype)
    for j, tok in enumerate(tokens):
        m[pos[tok], j] = 1.0
    summed = ops.matmul(ops.as_constant(m), scores)        # (m, T)
    return ops.softmax(ops.transpose(summed, (1, 0))), distinct


@dataclass
class MixResult:
    mixed: Tensor                 # (T, |V|)
    gate: Tensor                  # (T, 1); constant zeros when forced
    concept_probs: Tensor | None  # (T, m) after UNK-drop renormalization
    tokens: list[str] = field(default_factory=list)
    forced_zero_gate: bool = False


def mix_distributions(generic: Tensor, concept: Tensor | None, tokens,
                      vocab: Vocabulary, states: Tensor, p,
                      renormalize: bool = True) -> MixResult:
    """Soft-gate mixture of the concept and generic distributions.

    Concept tokens that map to UNK are dropped (with renormalization when
    ``renormalize``); an empty concept set forces the gate to 0.
    """
    t_steps = generic.data.shape[0]
    dtype = generic.data.dtype
    if concept is None or not tokens:
        zero = ops.as_constant(np.zeros((t_steps, 1), dtype=dtype))
        return MixResult(mixed=generic, gate=zero, concept_probs=None,
                         forced_zero_gate=True)
    ids = np.array([vocab.encode(tok) for tok in tokens], dtype=np.int64)
    keep = (ids != UNK_ID).astype(dtype)
    if not keep.any():
        zero = ops.as_constant(np.zeros((t_steps, 1), dtype=dtype))
        return MixResult(mixed=generic, gate=zero, concept_probs=None,
                         forced_zero_gate=True)
    kept = ops.mul(concept, ops.as_constant(keep[None, :]))
    if renormalize:
        denom = ops.sum_axis(kept, 1, keepdims=True)
        kept = ops.div(kept, denom)
    scattered = ops.scatter_cols(kept, ids, generic.data.shape[1])
    gate = ops.sigmoid(ops.matmul(states, p["point.wgate"]))   # (T, 1)
    one = ops.as_constant(np.ones((1, 1), dtype=dtype))
    mixed = ops.add(ops.mul(scattered, gate),
                    ops.mul(generic, ops.sub(one, gate)))
    return MixResult(mixed=mixed, gate=gate, concept_probs=kept,
                     tokens=list(tokens))


def concept_weight_logits(states: Tensor, concept_tokens, vocab: Vocabulary,
                          p) -> tuple[Tensor, list[str]] | tuple[None, list]:
    """Graph-free pointer weights: emb(w) . s_t + b_w over the emotion and
    cause concepts (used by the no-graph variant)."""
    kept = [tok for tok in sorted(set(concept_tokens)) if vocab.encode(tok) != UNK_ID]
    if not kept:
        return None, []
    ids = np.array([vocab.encode(tok) for tok in kept], dtype=np.int64)
    emb_w = ops.embedding(p["emb.tok"], ids)                  # (m, d)
    bias = ops.embedding(p["dec.bvoc"], ids)                  # (m,)
    logits = ops.add(ops.matmul(states, ops.transpose(emb_w, (1, 0))), bias)
    return logits, kept
