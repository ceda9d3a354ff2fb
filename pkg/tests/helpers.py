"""Shared builders for decoder/model tests."""

import numpy as np

from emocause.context import EncodedContext
from emocause.data import SPECIALS, Vocabulary
from emocause.gcn import encode_graphs
from emocause.graphs import CausalityGraph, GraphEdge, GraphNode
from emocause.nn import ParamRegistry
from emocause.nn.autograd import constant
from emocause.store import EmbeddingTable

RELS = ("r1", "r2")


def make_vocab(tokens):
    toks = SPECIALS + tuple(tokens)
    return Vocabulary(tokens=toks, index={t: i for i, t in enumerate(toks)})


def make_graph(nodes, edges, provenance=(1, 0)):
    return CausalityGraph(
        nodes=tuple(GraphNode(*n) for n in nodes),
        edges=tuple(GraphEdge(*e) for e in edges),
        provenance=provenance,
    )


def table_for(tokens, dim, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingTable(
        dimension=dim, vectors={t: rng.standard_normal(dim) for t in tokens})


def gru_param_arrays(prefix, d_in, d_h, rng=None, scale=0.3, dtype=np.float64):
    arrays = {}
    for gate in ("z", "r", "n"):
        for kind, shape in (("w", (d_in, d_h)), ("u", (d_h, d_h)), ("b", (d_h,))):
            name = f"{prefix}.{kind}{gate}"
            if rng is None or kind == "b":
                arrays[name] = np.zeros(shape, dtype=dtype)
            else:
                arrays[name] = (rng.standard_normal(shape) * scale).astype(dtype)
    return arrays


def fuse_param_arrays(d_g, d_gru, d_model, rng=None, tied=False, dtype=np.float64):
    arrays = gru_param_arrays("fuse.fw", 3 * d_g, d_gru, rng, dtype=dtype)
    if tied:
        arrays.update({k.replace(".fw.", ".bw."): v.copy() for k, v in arrays.items()})
    else:
        arrays.update(gru_param_arrays("fuse.bw", 3 * d_g, d_gru, rng, dtype=dtype))
    if rng is None:
        arrays["fuse.wg"] = np.zeros((2 * d_gru, d_model), dtype=dtype)
    else:
        arrays["fuse.wg"] = (rng.standard_normal((2 * d_gru, d_model)) * 0.3
                             ).astype(dtype)
    return arrays


def tensor_dict(arrays):
    return {k: constant(np.asarray(v)) for k, v in arrays.items()}


def registry_from(arrays, dtype=np.float64):
    reg = ParamRegistry()
    for name, arr in arrays.items():
        reg.add(name, np.asarray(arr, dtype=dtype))
    return reg, {p.name: p.tensor for p in reg}


def encoded_graphs_for(graphs, p, vocab, table, layers=1, dtype=np.float64):
    return encode_graphs(graphs, p, vocab, table, RELS, layers, dtype=dtype)


def fixed_context(states_array):
    arr = np.asarray(states_array, dtype=np.float64)
    t = constant(arr)
    return EncodedContext(states=t, cls_state=constant(arr[:1]),
                          real_mask=np.ones(arr.shape[0], dtype=bool))
