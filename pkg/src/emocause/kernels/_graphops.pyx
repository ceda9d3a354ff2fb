# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels: GCN edge aggregation and score propagation.

Mirrors ``_graphops_py`` exactly (same accumulation order); see that module
for the contract.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


def edge_aggregate_fwd(real[:, ::1] nodes, real[:, ::1] rels,
                       int[::1] half_dst, int[::1] half_src, int[::1] half_rel,
                       real[::1] inv_deg):
    cdef Py_ssize_t n = nodes.shape[0], d = nodes.shape[1]
    cdef Py_ssize_t m = half_dst.shape[0]
    cdef Py_ssize_t k, c, i, j, r
    if real is float:
        msg_arr = np.zeros((n, d), dtype=np.float32)
    else:
        msg_arr = np.zeros((n, d), dtype=np.float64)
    cdef real[:, ::1] msg = msg_arr
    for k in range(m):
        i = half_dst[k]
        j = half_src[k]
        r = half_rel[k]
        for c in range(d):
            msg[i, c] += nodes[j, c] - rels[r, c]
    for i in range(n):
        for c in range(d):
            msg[i, c] *= inv_deg[i]
    return msg_arr


def edge_aggregate_bwd(real[:, ::1] gmsg, Py_ssize_t n_rels,
                       int[::1] half_dst, int[::1] half_src, int[::1] half_rel,
                       real[::1] inv_deg):
    cdef Py_ssize_t n = gmsg.shape[0], d = gmsg.shape[1]
    cdef Py_ssize_t m = half_dst.shape[0]
    cdef Py_ssize_t k, c, i, j, r
    cdef real s
    if real is float:
        gnodes_arr = np.zeros((n, d), dtype=np.float32)
        grels_arr = np.zeros((n_rels, d), dtype=np.float32)
    else:
        gnodes_arr = np.zeros((n, d), dtype=np.float64)
        grels_arr = np.zeros((n_rels, d), dtype=np.float64)
    cdef real[:, ::1] gnodes = gnodes_arr
    cdef real[:, ::1] grels = grels_arr
    for k in range(m):
        i = half_dst[k]
        j = half_src[k]
        r = half_rel[k]
        for c in range(d):
            s = gmsg[i, c] * inv_deg[i]
            gnodes[j, c] += s
            grels[r, c] -= s
    return gnodes_arr, grels_arr


def propagate_fwd(real[:, ::1] relevance, int[::1] order, int[::1] depths,
                  int[::1] in_ptr, int[::1] in_parent, double gamma):
    cdef Py_ssize_t n_nodes = depths.shape[0]
    cdef Py_ssize_t t_steps = relevance.shape[1]
    cdef Py_ssize_t idx, i, a, b, k, t
    cdef real g = <real> gamma
    cdef real inv
    if real is float:
        scores_arr = np.zeros((n_nodes, t_steps), dtype=np.float32)
    else:
        scores_arr = np.zeros((n_nodes, t_steps), dtype=np.float64)
    cdef real[:, ::1] scores = scores_arr
    for idx in range(order.shape[0]):
        i = order[idx]
        if depths[i] == 0:
            for t in range(t_steps):
                scores[i, t] = 1.0
            continue
        a = in_ptr[i]
        b = in_ptr[i + 1]
        if a == b:
            continue
        inv = <real> (1.0 / (b - a))
        for k in range(a, b):
            for t in range(t_steps):
                scores[i, t] += g * scores[in_parent[k], t] + relevance[k, t]
        for t in range(t_steps):
            scores[i, t] *= inv
    return scores_arr


def propagate_bwd(real[:, ::1] gscores, int[::1] order, int[::1] depths,
                  int[::1] in_ptr, int[::1] in_parent, double gamma):
    cdef Py_ssize_t t_steps = gscores.shape[1]
    cdef Py_ssize_t n_in = in_ptr[in_ptr.shape[0] - 1]
    cdef Py_ssize_t idx, i, a, b, k, t
    cdef real gam = <real> gamma
    cdef real w, gi
    g_arr = np.array(gscores, copy=True)
    cdef real[:, ::1] g = g_arr
    if real is float:
        grel_arr = np.zeros((n_in, t_steps), dtype=np.float32)
    else:
        grel_arr = np.zeros((n_in, t_steps), dtype=np.float64)
    cdef real[:, ::1] grel = grel_arr
    for idx in range(order.shape[0] - 1, -1, -1):
        i = order[idx]
        if depths[i] == 0:
            continue
        a = in_ptr[i]
        b = in_ptr[i + 1]
        if a == b:
            continue
        w = <real> (1.0 / (b - a))
        for k in range(a, b):
            for t in range(t_steps):
                gi = g[i, t] * w
                grel[k, t] += gi
                g[in_parent[k], t] += gam * gi
    return grel_arr
