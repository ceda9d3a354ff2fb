"""Pure-numpy fallback for the compiled graph kernels.

Semantics are identical to ``_graphops.pyx``; only speed differs.  Both
backends accumulate in the same edge order, so results agree to within
floating-point associativity of ``np.add.at`` (tested at 1e-12 in double
precision).
"""

import numpy as np


def edge_aggregate_fwd(nodes, rels, half_dst, half_src, half_rel, inv_deg):
    """Mean-aggregate relation-shifted neighbour states.

    nodes: (N, d) node states, rels: (R, d) per-relation-type states.
    Half-edges: entry k sends ``nodes[half_src[k]] - rels[half_rel[k]]``
    into ``half_dst[k]``.  Each aggregated sum is scaled by
    ``inv_deg[i]`` (0 for isolated nodes).
    """
    msg = np.zeros_like(nodes)
    if len(half_dst):
        np.add.at(msg, half_dst, nodes[half_src] - rels[half_rel])
    msg *= inv_deg[:, None]
    return msg


def edge_aggregate_bwd(gmsg, n_rels, half_dst, half_src, half_rel, inv_deg):
    """Gradients of edge_aggregate_fwd w.r.t. node and relation states."""
    gnodes = np.zeros_like(gmsg)
    grels = np.zeros((n_rels, gmsg.shape[1]), dtype=gmsg.dtype)
    if len(half_dst):
        scaled = gmsg * inv_deg[:, None]
        np.add.at(gnodes, half_src, scaled[half_dst])
        np.add.at(grels, half_rel, -scaled[half_dst])
    return gnodes, grels


def propagate_fwd(relevance, order, depths, in_ptr, in_parent, gamma):
    """Evidence propagation from depth-0 nodes along in-edges.

    relevance: (n_in, T) per in-entry relevance values; ``order`` lists node
    indices by increasing depth; ``in_ptr``/``in_parent`` give each node's
    flattened in-entry slice.  Depth-0 nodes score 1, nodes with no
    in-entries score 0, others mean ``gamma * score(parent) + relevance``.
    """
    n_nodes = len(depths)
    t_steps = relevance.shape[1] if relevance.ndim == 2 else 1
    scores = np.zeros((n_nodes, t_steps), dtype=relevance.dtype)
    for i in order:
        if depths[i] == 0:
            scores[i] = 1.0
            continue
        a, b = in_ptr[i], in_ptr[i + 1]
        if a == b:
            continue
        acc = np.zeros(t_steps, dtype=relevance.dtype)
        for k in range(a, b):
            acc += gamma * scores[in_parent[k]] + relevance[k]
        scores[i] = acc / (b - a)
    return scores


def propagate_bwd(gscores, order, depths, in_ptr, in_parent, gamma):
    """Gradient of propagate_fwd w.r.t. the relevance entries."""
    g = gscores.copy()
    grel = np.zeros((in_ptr[-1], gscores.shape[1]), dtype=gscores.dtype)
    for idx in range(len(order) - 1, -1, -1):
        i = order[idx]
        if depths[i] == 0:
            continue
        a, b = in_ptr[i], in_ptr[i + 1]
        if a == b:
            continue
        w = 1.0 / (b - a)
        gi = g[i] * w
        for k in range(a, b):
            grel[k] += gi
            g[in_parent[k]] += gamma * gi
    return grel
