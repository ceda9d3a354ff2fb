"""Relation-aware GCN over causality graphs and triple-average pooling.

All graphs of a conversation are encoded together as a disjoint union
(identical math to per-graph encoding, one kernel call).  Messages are
mean-aggregated (neighbour state minus relation state), relations update
linearly each layer, and each graph pools to the mean of its
[src; relation; dst] triple vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Vocabulary
from .graphs import CausalityGraph
from .nn import Tensor, ops
from .store import EmbeddingTable


@dataclass
class MergedTopology:
    """Integer views of a conversation's graphs for the kernels."""

    n_nodes: int
    tokens: list[str]
    depths: np.ndarray       # (N,) int32
    roles: list[str]
    graph_of: np.ndarray     # (N,) int32
    edge_src: np.ndarray     # (E,) int32 node indices, stored orientation
    edge_dst: np.ndarray
    edge_rel: np.ndarray     # (E,) int32 relation-type ids
    edge_hop: np.ndarray
    graph_edge_ptr: np.ndarray  # (n_graphs + 1,) edge slice per graph
    half_dst: np.ndarray     # aggregation half-edges
    half_src: np.ndarray
    half_rel: np.ndarray
    inv_deg: np.ndarray      # (N,) float, 0 for isolated nodes
    order: np.ndarray        # (N,) int32 nodes by increasing depth
    in_ptr: np.ndarray       # (N + 1,) int32 propagation in-entry slices
    in_parent: np.ndarray    # (n_in,) int32
    in_child: np.ndarray
    in_rel: np.ndarray       # (n_in,) int32 relation-type ids

    @property
    def n_graphs(self) -> int:
        return len(self.graph_edge_ptr) - 1


def merge_graphs(graphs, relations, dtype=np.float32) -> MergedTopology:
    rel_index = {r: i for i, r in enumerate(relations)}
    tokens: list[str] = []
    depths: list[int] = []
    roles: list[str] = []
    graph_of: list[int] = []
    index: dict[tuple[int, str], int] = {}
    for gi, g in enumerate(graphs):
        for n in g.nodes:
            index[(gi, n.token)] = len(tokens)
            tokens.append(n.token)
            depths.append(n.depth)
            roles.append(n.role)
            graph_of.append(gi)

    edge_src: list[int] = []
    edge_dst: list[int] = []
    edge_rel: list[int] = []
    edge_hop: list[int] = []
    ptr = [0]
    for gi, g in enumerate(graphs):
        for e in g.edges:
            try:
                rel = rel_index[e.relation]
            except KeyError:
                raise KeyError(f"relation {e.relation!r} not in the store") from None
            edge_src.append(index[(gi, e.src)])
            edge_dst.append(index[(gi, e.dst)])
            edge_rel.append(rel)
            edge_hop.append(e.hop)
        ptr.append(len(edge_src))

    n = len(tokens)
    half_dst: list[int] = []
    half_src: list[int] = []
    half_rel: list[int] = []
    deg = np.zeros(n, dtype=np.int64)
    for s, d, r in zip(edge_src, edge_dst, edge_rel):
        half_dst.append(d)
        half_src.append(s)
        half_rel.append(r)
        half_dst.append(s)
        half_src.append(d)
        half_rel.append(r)
        deg[d] += 1
        deg[s] += 1
    inv_deg = np.zeros(n, dtype=dtype)
    nonzero = deg > 0
    inv_deg[nonzero] = (1.0 / deg[nonzero]).astype(dtype)

    depths_arr = np.asarray(depths, dtype=np.int32)
    in_entries: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for s, d, r in zip(edge_src, edge_dst, edge_rel):
        if depths_arr[s] < depths_arr[d]:
            in_entries[d].append((s, r))
        elif depths_arr[d] < depths_arr[s]:
            in_entries[s].append((d, r))
    in_ptr = [0]
    in_parent: list[int] = []
    in_child: list[int] = []
    in_rel: list[int] = []
    for i in range(n):
        for parent, rel in in_entries[i]:
            in_parent.append(parent)
            in_child.append(i)
            in_rel.append(rel)
        in_ptr.append(len(in_parent))

    order = np.argsort(depths_arr, kind="stable").astype(np.int32)
    as32 = lambda xs: np.asarray(xs, dtype=np.int32)  # noqa: E731
    return MergedTopology(
        n_nodes=n,
        tokens=tokens,
        depths=depths_arr,
        roles=roles,
        graph_of=as32(graph_of),
        edge_src=as32(edge_src),
        edge_dst=as32(edge_dst),
        edge_rel=as32(edge_rel),
        edge_hop=as32(edge_hop),
        graph_edge_ptr=as32(ptr),
        half_dst=as32(half_dst),
        half_src=as32(half_src),
        half_rel=as32(half_rel),
        inv_deg=inv_deg,
        order=order,
        in_ptr=as32(in_ptr),
        in_parent=as32(in_parent),
        in_child=as32(in_child),
        in_rel=as32(in_rel),
    )


@dataclass
class EncodedGraphs:
    topo: MergedTopology
    node_states: Tensor          # (N, d_g)
    relation_states: Tensor      # (n_relation_types, d_g) after L updates
    triples: Tensor              # (E, 3 d_g) stored orientation
    pooled: list[Tensor]         # per graph, (1, 3 d_g); zeros when edgeless
    prop_triples: Tensor         # (n_in, 3 d_g) parent -> child orientation


@dataclass
class EncodedGraph:
    """Single-graph view matching the construction-time node order."""

    tokens: tuple[str, ...]
    node_states: Tensor
    relation_states: Tensor      # per edge
    pooled: Tensor               # (1, 3 d_g)


def node_init(topo: MergedTopology, p, vocab: Vocabulary, table: EmbeddingTable,
              dtype=np.float32) -> Tensor:
    """Shared word embeddings for in-vocabulary nodes, static store vectors
    otherwise, then the learned projection into the graph width."""
    n = topo.n_nodes
    d_word = p["emb.tok"].data.shape[1]
    ids = np.zeros(n, dtype=np.int64)
    in_vocab = np.zeros((n, 1), dtype=dtype)
    base = np.zeros((n, d_word), dtype=dtype)
    for i, tok in enumerate(topo.tokens):
        idx = vocab.encode(tok)
        if idx != 4:  # UNK
            ids[i] = idx
            in_vocab[i] = 1.0
        else:
            base[i] = table.vector(tok).astype(dtype)
    emb_rows = ops.embedding(p["emb.tok"], ids)
    mask = ops.as_constant(in_vocab)
    inv = ops.as_constant(1.0 - in_vocab)
    x = ops.add(ops.mul(emb_rows, mask), ops.mul(ops.as_constant(base), inv))
    return ops.affine(x, p["gcn.proj.w"], p["gcn.proj.b"])


def gcn_layer(topo: MergedTopology, node_states: Tensor, relation_states: Tensor,
              p, prefix: str) -> Tensor:
    """ReLU(self map + mean over adjacent edges of W_n (neighbour - relation))."""
    msg = ops.edge_aggregate(
        node_states, relation_states,
        topo.half_dst, topo.half_src, topo.half_rel, topo.inv_deg,
    )
    return ops.relu(ops.add(
        ops.matmul(node_states, p[f"{prefix}.ws"]),
        ops.matmul(msg, p[f"{prefix}.wn"]),
    ))


def relation_update(relation_states: Tensor, p, prefix: str) -> Tensor:
    """Linear relation refresh (no nonlinearity)."""
    return ops.matmul(relation_states, p[f"{prefix}.wr"])


def encode_graphs(graphs, p, vocab: Vocabulary, table: EmbeddingTable,
                  relations, layers: int, dtype=np.float32) -> EncodedGraphs:
    topo = merge_graphs(graphs, relations=relations, dtype=dtype)
    d_g = p["gcn.proj.w"].data.shape[1]
    if topo.n_nodes:
        h = node_init(topo, p, vocab, table, dtype=dtype)
    else:
        h = ops.as_constant(np.zeros((0, d_g), dtype=dtype))
    rel = p["gcn.rel"]
    for layer in range(layers):
        h_next = gcn_layer(topo, h, rel, p, f"gcn.l{layer}")
        rel = relation_update(rel, p, f"gcn.l{layer}")
        h = h_next

    if len(topo.edge_src):
        triples = ops.concat(
            [ops.take_rows(h, topo.edge_src),
             ops.take_rows(rel, topo.edge_rel),
             ops.take_rows(h, topo.edge_dst)], axis=1)
    else:
        triples = ops.as_constant(np.zeros((0, 3 * d_g), dtype=dtype))
    pooled = []
    for gi in range(topo.n_graphs):
        a, b = int(topo.graph_edge_ptr[gi]), int(topo.graph_edge_ptr[gi + 1])
        if a == b:
            pooled.append(ops.as_constant(np.zeros((1, 3 * d_g), dtype=dtype)))
        else:
            pooled.append(ops.reshape(
                ops.mean_axis(ops.rows(triples, a, b), 0), (1, 3 * d_g)))
    if len(topo.in_parent):
        prop_triples = ops.concat(
            [ops.take_rows(h, topo.in_parent),
             ops.take_rows(rel, topo.in_rel),
             ops.take_rows(h, topo.in_child)], axis=1)
    else:
        prop_triples = ops.as_constant(np.zeros((0, 3 * d_g), dtype=dtype))
    return EncodedGraphs(
        topo=topo, node_states=h, relation_states=rel,
        triples=triples, pooled=pooled, prop_triples=prop_triples,
    )


def encode_graph(graph: CausalityGraph, p, vocab: Vocabulary,
                 table: EmbeddingTable, relations, layers: int,
                 dtype=np.float32) -> EncodedGraph:
    """Spec-facing single-graph encoding."""
    enc = encode_graphs([graph], p, vocab, table, relations, layers, dtype=dtype)
    per_edge = (
        ops.take_rows(enc.relation_states, enc.topo.edge_rel)
        if len(enc.topo.edge_rel)
        else ops.as_constant(np.zeros((0, enc.node_states.data.shape[1]), dtype=dtype))
    )
    return EncodedGraph(
        tokens=tuple(enc.topo.tokens),
        node_states=enc.node_states,
        relation_states=per_edge,
        pooled=enc.pooled[0],
    )


def pool_graph(encoded: EncodedGraph) -> Tensor:
    """Idempotent accessor for the pooled triple-average vector."""
    return encoded.pooled
