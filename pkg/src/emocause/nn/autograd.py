"""Minimal reverse-mode tape over numpy arrays.

Tensors record their parents and a backward closure; ``backward()`` on a
scalar walks the tape in reverse topological order.  ``no_grad()``
disables tape recording (used by finite-difference loops and decoding).
"""

from __future__ import annotations

import numpy as np

_grad_enabled = True


class no_grad:
    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "parents", "bwd", "requires")

    def __init__(self, data, parents=(), bwd=None, requires=False):
        self.data = data
        self.grad = None
        self.parents = parents
        self.bwd = bwd
        self.requires = requires

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def accumulate(self, g) -> None:
        if not self.requires:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen and p.requires:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node.bwd is not None and node.grad is not None:
                node.bwd(node.grad)


def leaf(data, trainable: bool = True) -> Tensor:
    return Tensor(data, requires=trainable)


def constant(data) -> Tensor:
    return Tensor(np.asarray(data))


def make(data, parents, bwd) -> Tensor:
    """Result tensor; records the tape only when a parent needs gradients."""
    if _grad_enabled and any(p.requires for p in parents):
        return Tensor(data, parents=tuple(parents), bwd=bwd, requires=True)
    return Tensor(data)
