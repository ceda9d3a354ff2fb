"""Differentiable primitives over the autograd tape.

Every op returns a Tensor; backward closures accumulate into parents.
Graph aggregation and score propagation dispatch to the compiled kernels
(or their numpy fallback).
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from .autograd import Tensor, constant, make


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bwd(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(g, b.data.shape))

    return make(out, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def bwd(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(-_unbroadcast(g, b.data.shape))

    return make(out, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def bwd(g):
        a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return make(out, (a, b), bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data

    def bwd(g):
        a.accumulate(_unbroadcast(g / b.data, a.data.shape))
        b.accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return make(out, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    out = a.data * a.data.dtype.type(c)

    def bwd(g):
        a.accumulate(g * a.data.dtype.type(c))

    return make(out, (a,), bwd)


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = np.matmul(a.data, b.data)

    def bwd(g):
        a.accumulate(np.matmul(g, b.data.swapaxes(-1, -2)))
        b.accumulate(np.matmul(a.data.swapaxes(-1, -2), g))

    return make(out, (a, b), bwd)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0)

    def bwd(g):
        a.accumulate(g * (a.data > 0))

    return make(out, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        a.accumulate(g * out * (1.0 - out))

    return make(out, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def bwd(g):
        a.accumulate(g * (1.0 - out * out))

    return make(out, (a,), bwd)


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore"):
        out = np.log(a.data)

    def bwd(g):
        a.accumulate(g / a.data)

    return make(out, (a,), bwd)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis; max-subtracted, float64 accumulation."""
    x = a.data
    ex = np.exp(x - x.max(axis=-1, keepdims=True))
    s = ex.sum(axis=-1, keepdims=True, dtype=np.float64)
    out = np.asarray(ex / s, dtype=x.dtype)

    def bwd(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        a.accumulate(out * (g - dot))

    return make(out, (a,), bwd)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + x.dtype.type(eps))
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def bwd(g):
        gxhat = g * gain.data
        gain.accumulate(_unbroadcast(g * xhat, gain.data.shape))
        bias.accumulate(_unbroadcast(g, bias.data.shape))
        m1 = gxhat.mean(axis=-1, keepdims=True)
        m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
        a.accumulate(inv * (gxhat - m1 - xhat * m2))

    return make(out, (a, gain, bias), bwd)


def conv1d_w3(a: Tensor, w: Tensor, b: Tensor, padding: str = "both") -> Tensor:
    """Width-3 convolution over positions, length-preserving.

    a: (T, d_in), w: (3, d_in, d_out), b: (d_out,).  ``both`` pads one zero
    row on each side; ``left`` pads two rows before (causal: output t sees
    inputs t-2..t only).
    """
    x = a.data
    t = x.shape[0]
    xp = np.zeros((t + 2, x.shape[1]), dtype=x.dtype)
    if padding == "both":
        xp[1:-1] = x
    elif padding == "left":
        xp[2:] = x
    else:
        raise ValueError(f"unknown padding {padding!r}")
    out = xp[0:t] @ w.data[0] + xp[1:t + 1] @ w.data[1] + xp[2:t + 2] @ w.data[2]
    out += b.data

    def bwd(g):
        b.accumulate(g.sum(axis=0))
        gw = np.stack(
            [xp[0:t].T @ g, xp[1:t + 1].T @ g, xp[2:t + 2].T @ g], axis=0
        )
        w.accumulate(gw)
        gxp = np.zeros_like(xp)
        for k in range(3):
            gxp[k:t + k] += g @ w.data[k].T
        a.accumulate(gxp[1:-1] if padding == "both" else gxp[2:])

    return make(out, (a, w, b), bwd)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)
    out = table.data[ids]

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        table.accumulate(gt)

    return make(out, (table,), bwd)


take_rows = embedding  # same gather/scatter semantics for intermediate tensors


def pick(a: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    out = a.data[rows, cols]

    def bwd(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (rows, cols), g)
        a.accumulate(ga)

    return make(out, (a,), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, s, e in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(s, e)
            t.accumulate(g[tuple(idx)])

    return make(out, tuple(tensors), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def bwd(g):
        a.accumulate(g.reshape(a.data.shape))

    return make(out, (a,), bwd)


def transpose(a: Tensor, axes) -> Tensor:
    out = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def bwd(g):
        a.accumulate(np.transpose(g, inverse))

    return make(out, (a,), bwd)


def rows(a: Tensor, start: int, stop: int) -> Tensor:
    out = a.data[start:stop]

    def bwd(g):
        ga = np.zeros_like(a.data)
        ga[start:stop] = g
        a.accumulate(ga)

    return make(out, (a,), bwd)


def sum_all(a: Tensor) -> Tensor:
    out = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def bwd(g):
        a.accumulate(np.broadcast_to(g, a.data.shape).copy())

    return make(out, (a,), bwd)


def sum_axis(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        a.accumulate(np.broadcast_to(gg, a.data.shape).copy())

    return make(out, (a,), bwd)


def mean_axis(a: Tensor, axis: int) -> Tensor:
    n = a.data.shape[axis]
    return scale(sum_axis(a, axis), 1.0 / n)


def scatter_cols(p: Tensor, cols: np.ndarray, width: int) -> Tensor:
    """Scatter (T, m) probabilities onto (T, width), summing collisions."""
    t, m = p.data.shape
    out = np.zeros((t, width), dtype=p.data.dtype)
    rr = np.repeat(np.arange(t), m)
    cc = np.tile(cols, t)
    np.add.at(out, (rr, cc), p.data.ravel())

    def bwd(g):
        p.accumulate(g[:, cols])

    return make(out, (p,), bwd)


def affine(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    out = matmul(x, w)
    return add(out, b) if b is not None else out


def edge_aggregate(nodes: Tensor, rels: Tensor, half_dst, half_src, half_rel,
                   inv_deg) -> Tensor:
    """Per-node mean of (neighbour state - relation state) over adjacent edges."""
    out = kernels.edge_aggregate_fwd(
        np.ascontiguousarray(nodes.data), np.ascontiguousarray(rels.data),
        half_dst, half_src, half_rel, inv_deg,
    )

    def bwd(g):
        gn, gr = kernels.edge_aggregate_bwd(
            np.ascontiguousarray(g), rels.data.shape[0],
            half_dst, half_src, half_rel, inv_deg,
        )
        nodes.accumulate(gn)
        rels.accumulate(gr)

    return make(out, (nodes, rels), bwd)


def propagate(relevance: Tensor, order, depths, in_ptr, in_parent,
              gamma: float) -> Tensor:
    """Evidence scores per node and step from per-in-edge relevance values."""
    out = kernels.propagate_fwd(
        np.ascontiguousarray(relevance.data), order, depths, in_ptr, in_parent, gamma
    )

    def bwd(g):
        grel = kernels.propagate_bwd(
            np.ascontiguousarray(g), order, depths, in_ptr, in_parent, gamma
        )
        relevance.accumulate(grel)

    return make(out, (relevance,), bwd)


def as_constant(arr, dtype=None) -> Tensor:
    arr = np.asarray(arr)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    return constant(arr)
