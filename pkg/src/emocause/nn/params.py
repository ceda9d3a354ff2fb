"""Named trainable parameters: registry, deterministic init, checkpoints."""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, leaf

CHECKPOINT_MAGIC = b"EMOCKPT1"


@dataclass
class Parameter:
    name: str
    tensor: Tensor
    trainable: bool = True

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        self.tensor.data = value


class ParamRegistry:
    """Ordered name -> Parameter map; names are unique and hierarchical."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = leaf(value, trainable=trainable)
        self._params[name] = Parameter(name=name, tensor=t, trainable=trainable)
        return t

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def trainable(self):
        return [p for p in self._params.values() if p.trainable]

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.tensor.grad = None

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self._params.items():
            if name not in state:
                raise KeyError(f"checkpoint missing parameter {name!r}")
            if state[name].shape != p.data.shape:
                raise ValueError(
                    f"parameter {name!r}: checkpoint shape {state[name].shape} "
                    f"!= model shape {p.data.shape}"
                )
            p.data = state[name].astype(p.data.dtype, copy=True)

    def astype(self, dtype) -> "ParamRegistry":
        other = ParamRegistry()
        for name, p in self._params.items():
            other.add(name, p.data.astype(dtype), trainable=p.trainable)
        return other

    def total_scalars(self) -> int:
        return sum(p.data.size for p in self._params.values())


def _name_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def _fans(shape) -> tuple[int, int]:
    if len(shape) == 1:
        return shape[0], shape[0]
    if len(shape) == 2:
        return shape[0], shape[1]
    if len(shape) == 3:  # (width, in, out) convolution taps
        return shape[0] * shape[1], shape[0] * shape[2]
    raise ValueError(f"unsupported parameter rank {len(shape)}")


def seeded_init(name: str, shape, seed: int, scheme: str, dtype=np.float32,
                vocab_tokens=None, table=None) -> np.ndarray:
    """Deterministic per (seed, name) initial value.

    uniform-scaled draws U(-a, a) with a = sqrt(6 / (fan_in + fan_out));
    pretrained fills embedding rows from the word table, falling back to
    uniform-scaled rows for tokens without a stored vector.
    """
    shape = tuple(shape)
    if scheme == "zeros":
        return np.zeros(shape, dtype=dtype)
    rng = _name_rng(seed, name)
    fan_in, fan_out = _fans(shape)
    a = np.sqrt(6.0 / (fan_in + fan_out))
    if scheme == "uniform-scaled":
        return rng.uniform(-a, a, size=shape).astype(dtype)
    if scheme == "pretrained":
        if vocab_tokens is None or table is None or len(shape) != 2:
            raise ValueError("pretrained init requires an embedding shape and table")
        if len(vocab_tokens) != shape[0] or table.dimension != shape[1]:
            raise ValueError(
                f"pretrained init shape {shape} does not match "
                f"{len(vocab_tokens)} tokens x {table.dimension} dims"
            )
        out = rng.uniform(-a, a, size=shape).astype(dtype)
        for i, tok in enumerate(vocab_tokens):
            if tok in table:
                out[i] = table.vector(tok).astype(dtype)
        return out
    raise ValueError(f"unknown init scheme {scheme!r}")


def save_checkpoint(path, registry: ParamRegistry) -> None:
    """Versioned binary container; round-trips bitwise."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(registry)))
        for p in registry:
            name = p.name.encode("utf-8")
            dtype = np.dtype(p.data.dtype).newbyteorder("<")
            dtype_str = dtype.str.encode("ascii")
            fh.write(struct.pack("<H", len(name)))
            fh.write(name)
            fh.write(struct.pack("<H", len(dtype_str)))
            fh.write(dtype_str)
            fh.write(struct.pack("<B", p.data.ndim))
            fh.write(struct.pack(f"<{p.data.ndim}Q", *p.data.shape))
            fh.write(struct.pack("<B", int(p.trainable)))
            fh.write(np.ascontiguousarray(p.data.astype(dtype)).tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (count,) = struct.unpack("<I", fh.read(4))
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (dlen,) = struct.unpack("<H", fh.read(2))
            dtype = np.dtype(fh.read(dlen).decode("ascii"))
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim)) if ndim else ()
            fh.read(1)  # trainable flag, informational
            n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            data = np.frombuffer(fh.read(n_bytes), dtype=dtype).reshape(shape)
            out[name] = data.copy()
    return out
