"""Full response model: parameter construction, encoder-to-mixture forward
pass, incremental decoding, and score tracing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import decoder as dec
from .causes import causal_buckets
from .config import RunConfig
from .context import STATE_TAG_IDS, EncodedContext, encode_context, predict_emotion
from .data import (
    CLS_ID,
    EOS_ID,
    NUM_EMOTIONS,
    SOS_ID,
    Conversation,
    Vocabulary,
    flatten_context,
)
from .gcn import EncodedGraphs, encode_graphs
from .graphs import CausalityGraph
from .nn import ParamRegistry, Tensor, ops, seeded_init
from .store import TripleStore


@dataclass
class EncodedConversation:
    """Encoder-ready view of one conversation."""

    conversation: Conversation
    token_ids: np.ndarray
    bucket_ids: np.ndarray
    state_ids: np.ndarray
    emotion_label: int
    target_ids: np.ndarray                    # gold tokens plus EOS
    graphs: list[CausalityGraph]
    concept_tokens: list[str]                 # emotion/cause union (graph-free pointer)
    concept_roles: dict[str, str]
    clause_cause_ids: list[list[int]]         # per emotion clause, flattened causes

    @property
    def id(self) -> str:
        return self.conversation.id


def prepare_conversation(conversation: Conversation, vocab: Vocabulary,
                         annotations, concept_sets, graphs,
                         cfg: RunConfig) -> EncodedConversation:
    flat = flatten_context(conversation)
    buckets = causal_buckets(conversation, annotations, cfg.num_buckets)
    token_ids = [CLS_ID] + vocab.encode_all(flat.tokens)
    state_ids = [STATE_TAG_IDS["cls"]] + [STATE_TAG_IDS[t] for t in flat.state_tags]
    if len(token_ids) > cfg.max_context_len:
        keep = cfg.max_context_len - 1
        token_ids = [token_ids[0]] + token_ids[-keep:]
        buckets = [buckets[0]] + buckets[-keep:]
        state_ids = [state_ids[0]] + state_ids[-keep:]

    target_tokens = conversation.target_response[: cfg.max_target_len - 1]
    target_ids = np.array(vocab.encode_all(target_tokens) + [EOS_ID], dtype=np.int64)

    roles: dict[str, str] = {}
    for cs in concept_sets:
        for tok in cs.emotion_concepts:
            roles.setdefault(tok, "emotion")
        for tok in cs.cause_concepts:
            roles[tok] = "cause"
    clause_cause_ids = []
    for ann in annotations:
        ids: list[int] = []
        for utt_idx, clause_idx in ann.cause_clauses:
            utt = conversation.utterance(utt_idx)
            s, e = utt.clauses[clause_idx]
            ids.extend(vocab.encode_all(utt.tokens[s:e]))
        clause_cause_ids.append(ids)

    return EncodedConversation(
        conversation=conversation,
        token_ids=np.array(token_ids, dtype=np.int64),
        bucket_ids=np.array(buckets, dtype=np.int64),
        state_ids=np.array(state_ids, dtype=np.int64),
        emotion_label=conversation.emotion_label,
        target_ids=target_ids,
        graphs=list(graphs),
        concept_tokens=sorted(roles),
        concept_roles=roles,
        clause_cause_ids=clause_cause_ids,
    )


def build_params(cfg: RunConfig, vocab: Vocabulary, table, relations,
                 dtype=np.float32) -> ParamRegistry:
    """Every trainable matrix/bias, addressable by hierarchical name.

    Output heads (vocabulary projection, emotion head, gate, relevance)
    start at zero so a fresh model predicts uniform distributions; internal
    weights use the uniform-scaled scheme; token embeddings come from the
    pretrained table where available.  The causal-bucket embedding is
    frozen after initialization.
    """
    reg = ParamRegistry()
    seed = cfg.seed
    inner = cfg.n_heads * cfg.d_head

    def uniform(name, shape):
        reg.add(name, seeded_init(name, shape, seed, "uniform-scaled", dtype=dtype))

    def zeros(name, shape, trainable=True):
        reg.add(name, np.zeros(shape, dtype=dtype), trainable=trainable)

    def ones(name, shape):
        reg.add(name, np.ones(shape, dtype=dtype))

    reg.add(
        "emb.tok",
        seeded_init("emb.tok", (len(vocab), cfg.d_model), seed, "pretrained",
                    dtype=dtype, vocab_tokens=vocab.tokens, table=table),
    )
    reg.add(
        "emb.cas",
        seeded_init("emb.cas", (cfg.num_buckets, cfg.d_model), seed,
                    "uniform-scaled", dtype=dtype),
        trainable=False,
    )
    uniform("emb.utt", (len(STATE_TAG_IDS), cfg.d_model))

    def attention(prefix):
        uniform(f"{prefix}.wq", (cfg.d_model, inner))
        uniform(f"{prefix}.wk", (cfg.d_model, inner))
        uniform(f"{prefix}.wv", (cfg.d_model, inner))
        uniform(f"{prefix}.wo", (inner, cfg.d_model))
        for b in ("bq", "bv"):
            zeros(f"{prefix}.{b}", (inner,))
        zeros(f"{prefix}.bo", (cfg.d_model,))

    def conv(prefix):
        uniform(f"{prefix}.w1", (3, cfg.d_model, cfg.d_ff))
        zeros(f"{prefix}.b1", (cfg.d_ff,))
        uniform(f"{prefix}.w2", (3, cfg.d_ff, cfg.d_model))
        zeros(f"{prefix}.b2", (cfg.d_model,))

    def norm(prefix):
        ones(f"{prefix}.g", (cfg.d_model,))
        zeros(f"{prefix}.b", (cfg.d_model,))

    for i in range(cfg.enc_layers):
        attention(f"enc.l{i}.attn")
        conv(f"enc.l{i}.conv")
        norm(f"enc.l{i}.ln1")
        norm(f"enc.l{i}.ln2")
    zeros("emo.w", (cfg.d_model, NUM_EMOTIONS))

    for i in range(cfg.dec_layers):
        attention(f"dec.l{i}.self")
        attention(f"dec.l{i}.cross")
        conv(f"dec.l{i}.conv")
        for ln in ("ln1", "ln2", "ln3"):
            norm(f"dec.l{i}.{ln}")
    zeros("dec.wvoc", (cfg.d_model, len(vocab)))
    zeros("dec.bvoc", (len(vocab),))

    if cfg.ablation != "no_graph":
        uniform("gcn.proj.w", (cfg.d_model, cfg.d_g))
        zeros("gcn.proj.b", (cfg.d_g,))
        uniform("gcn.rel", (len(relations), cfg.d_g))
        for layer in range(cfg.gcn_layers):
            uniform(f"gcn.l{layer}.ws", (cfg.d_g, cfg.d_g))
            uniform(f"gcn.l{layer}.wn", (cfg.d_g, cfg.d_g))
            uniform(f"gcn.l{layer}.wr", (cfg.d_g, cfg.d_g))
    else:
        uniform("nograph.wclause", (cfg.d_model, 3 * cfg.d_g))

    if cfg.ablation != "no_implicit":
        for direction in ("fw", "bw"):
            for gate in ("z", "r", "n"):
                uniform(f"fuse.{direction}.w{gate}", (3 * cfg.d_g, cfg.d_gru))
                uniform(f"fuse.{direction}.u{gate}", (cfg.d_gru, cfg.d_gru))
                zeros(f"fuse.{direction}.b{gate}", (cfg.d_gru,))
        uniform("fuse.wg", (2 * cfg.d_gru, cfg.d_model))

    if cfg.ablation in ("full", "no_implicit"):
        zeros("point.wrel", (3 * cfg.d_g, cfg.d_model))
    if cfg.ablation != "no_explicit":
        zeros("point.wgate", (cfg.d_model, 1))
    return reg


@dataclass
class ForwardPass:
    encoded: EncodedContext
    emotion_probs: Tensor
    h_q: Tensor
    states: Tensor
    generic: Tensor
    mix: dec.MixResult
    enc_graphs: EncodedGraphs | None = None
    node_scores: Tensor | None = None


@dataclass
class DecodeContext:
    """Prefix-independent pieces, computed once per conversation."""

    ex: EncodedConversation
    encoded: EncodedContext
    h_q: Tensor
    enc_graphs: EncodedGraphs | None


@dataclass
class StepTrace:
    gate: float
    entries: list[tuple[str, int, int, str, float, float]]
    # (token, graph index, depth, role, raw score, token probability)


class ResponseModel:
    def __init__(self, cfg: RunConfig, vocab: Vocabulary, store: TripleStore,
                 registry: ParamRegistry | None = None, dtype=np.float32):
        self.cfg = cfg
        self.vocab = vocab
        self.store = store
        self.dtype = dtype
        self.registry = registry if registry is not None else build_params(
            cfg, vocab, store.table, store.relations, dtype=dtype)
        self.p = {param.name: param.tensor for param in self.registry}

    # -- encoder-side pieces -------------------------------------------------

    def encode(self, ex: EncodedConversation) -> EncodedContext:
        return encode_context(ex.token_ids, ex.bucket_ids, ex.state_ids, self.p,
                              self.cfg.enc_layers, self.cfg.n_heads, dtype=self.dtype)

    def _encode_graphs(self, ex: EncodedConversation) -> EncodedGraphs:
        return encode_graphs(ex.graphs, self.p, self.vocab, self.store.table,
                             self.store.relations, self.cfg.gcn_layers,
                             dtype=self.dtype)

    def _clause_causality(self, ex: EncodedConversation) -> Tensor:
        """Graph-free causality vector: BiGRU over per-emotion-clause mean
        embeddings of the cause-clause tokens."""
        vectors = []
        width = 3 * self.cfg.d_g
        for ids in ex.clause_cause_ids:
            if ids:
                rows = ops.embedding(self.p["emb.tok"], np.asarray(ids, dtype=np.int64))
                mean = ops.reshape(ops.mean_axis(rows, 0), (1, self.cfg.d_model))
                vectors.append(ops.matmul(mean, self.p["nograph.wclause"]))
            else:
                vectors.append(ops.as_constant(np.zeros((1, width), dtype=self.dtype)))
        return dec.fuse_causality(vectors, self.p, self.cfg.d_model, dtype=self.dtype)

    def causality_vector(self, ex: EncodedConversation,
                         enc_graphs: EncodedGraphs | None) -> Tensor:
        if self.cfg.ablation == "no_implicit":
            return ops.as_constant(np.zeros((1, self.cfg.d_model), dtype=self.dtype))
        if self.cfg.ablation == "no_graph":
            return self._clause_causality(ex)
        assert enc_graphs is not None
        return dec.fuse_causality(enc_graphs.pooled, self.p, self.cfg.d_model,
                                  dtype=self.dtype)

    # -- full teacher-forced pass --------------------------------------------

    def forward(self, ex: EncodedConversation, hq_override=None) -> ForwardPass:
        cfg = self.cfg
        encoded = self.encode(ex)
        emotion_probs = predict_emotion(encoded, self.p)
        enc_graphs = None
        if cfg.ablation != "no_graph":
            enc_graphs = self._encode_graphs(ex)
        h_q = self.causality_vector(ex, enc_graphs)
        if hq_override is not None:
            h_q = ops.as_constant(np.asarray(hq_override, dtype=self.dtype))
        dec_input = np.concatenate(([SOS_ID], ex.target_ids[:-1]))
        states = dec.decoder_states(dec_input, encoded, h_q, self.p,
                                    cfg.dec_layers, cfg.n_heads,
                                    cfg.max_target_len + 1, dtype=self.dtype)
        generic = dec.generic_distribution(states, self.p)
        mix, node_scores = self._pointer(ex, enc_graphs, states, generic)
        return ForwardPass(encoded=encoded, emotion_probs=emotion_probs, h_q=h_q,
                           states=states, generic=generic, mix=mix,
                           enc_graphs=enc_graphs, node_scores=node_scores)

    def _pointer(self, ex, enc_graphs, states, generic):
        cfg = self.cfg
        if cfg.ablation == "no_explicit":
            t = states.data.shape[0]
            zero = ops.as_constant(np.zeros((t, 1), dtype=self.dtype))
            return dec.MixResult(mixed=generic, gate=zero, concept_probs=None,
                                 forced_zero_gate=True), None
        if cfg.ablation == "no_graph":
            logits, kept = dec.concept_weight_logits(states, ex.concept_tokens,
                                                     self.vocab, self.p)
            if logits is None:
                return dec.mix_distributions(generic, None, [], self.vocab,
                                             states, self.p), None
            concept = ops.softmax(logits)
            return dec.mix_distributions(generic, concept, kept, self.vocab,
                                         states, self.p, renormalize=False), logits
        assert enc_graphs is not None
        tokens = enc_graphs.topo.tokens
        if not tokens:
            return dec.mix_distributions(generic, None, [], self.vocab, states,
                                         self.p), None
        scores = dec.propagate_scores(enc_graphs, states, cfg.gamma, self.p)
        concept, distinct = dec.concept_distribution(scores, tokens)
        mix = dec.mix_distributions(generic, concept, distinct, self.vocab,
                                    states, self.p)
        return mix, scores

    # -- incremental decoding ------------------------------------------------

    def decode_context(self, ex: EncodedConversation,
                       hq_override=None) -> DecodeContext:
        encoded = self.encode(ex)
        enc_graphs = None
        if self.cfg.ablation != "no_graph":
            enc_graphs = self._encode_graphs(ex)
        h_q = self.causality_vector(ex, enc_graphs)
        if hq_override is not None:
            h_q = ops.as_constant(np.asarray(hq_override, dtype=self.dtype))
        return DecodeContext(ex=ex, encoded=encoded, h_q=h_q, enc_graphs=enc_graphs)

    def step(self, dc: DecodeContext, prefix_ids) -> tuple[np.ndarray, StepTrace]:
        """Log-probabilities over the vocabulary for the next token."""
        cfg = self.cfg
        state = dec.decoder_step(prefix_ids, dc.encoded, dc.h_q, self.p,
                                 cfg.dec_layers, cfg.n_heads,
                                 cfg.max_target_len + 1, dtype=self.dtype)
        generic = dec.generic_distribution(state, self.p)
        mix, scores = self._pointer(dc.ex, dc.enc_graphs, state, generic)
        trace = self._step_trace(dc, mix, scores)
        with np.errstate(divide="ignore"):
            logp = np.log(mix.mixed.data[0].astype(np.float64))
        return logp, trace

    def step_logprobs(self, dc: DecodeContext, prefix_ids) -> np.ndarray:
        return self.step(dc, prefix_ids)[0]

    def _step_trace(self, dc: DecodeContext, mix: dec.MixResult, scores) -> StepTrace:
        gate = float(mix.gate.data[0, 0])
        entries: list[tuple[str, int, int, str, float, float]] = []
        if self.cfg.ablation == "no_graph" and mix.concept_probs is not None:
            probs = {tok: float(mix.concept_probs.data[0, j])
                     for j, tok in enumerate(mix.tokens)}
            raw = {tok: float(scores.data[0, j]) for j, tok in enumerate(mix.tokens)}
            for tok in mix.tokens:
                role = dc.ex.concept_roles.get(tok, "cause")
                entries.append((tok, 0, 0, role, raw[tok], probs[tok]))
        elif dc.enc_graphs is not None and scores is not None:
            topo = dc.enc_graphs.topo
            tok_prob: dict[str, float] = {}
            if mix.concept_probs is not None:
                tok_prob = {tok: float(mix.concept_probs.data[0, j])
                            for j, tok in enumerate(mix.tokens)}
            for i, tok in enumerate(topo.tokens):
                entries.append(
                    (tok, int(topo.graph_of[i]), int(topo.depths[i]), topo.roles[i],
                     float(scores.data[i, 0]), tok_prob.get(tok, 0.0))
                )
        return StepTrace(gate=gate, entries=entries)


TRACE_VERSION = "score-trace v1"


def greedy_trace_decode(model: ResponseModel, ex: EncodedConversation,
                        max_len: int) -> tuple[list[int], list[StepTrace]]:
    dc = model.decode_context(ex)
    prefix = [SOS_ID]
    steps: list[StepTrace] = []
    out: list[int] = []
    for _ in range(max_len):
        logp, trace = model.step(dc, prefix)
        steps.append(trace)
        nxt = int(np.argmax(logp))
        out.append(nxt)
        if nxt == EOS_ID:
            break
        prefix.append(nxt)
    return out, steps


def format_trace(conversation_id: str, steps, chosen_ids, vocab: Vocabulary) -> str:
    lines = [TRACE_VERSION, f"conversation {conversation_id}"]
    for t, (trace, tok_id) in enumerate(zip(steps, chosen_ids)):
        lines.append(f"step {t} gate {trace.gate:.8e} token {vocab.tokens[tok_id]}")
        for tok, graph_i, depth, role, raw, prob in trace.entries:
            lines.append(
                f"concept {tok} graph={graph_i} depth={depth} role={role} "
                f"score={raw:.8e} prob={prob:.8e}"
            )
        lines.append("endstep")
    return "\n".join(lines) + "\n"
