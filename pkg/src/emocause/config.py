"""Flat key = value run configuration with typed parsing and overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

ABLATIONS = ("full", "no_graph", "no_implicit", "no_explicit")
DETECTORS = ("lexical", "oracle")


@dataclass
class RunConfig:
    # paths
    store_path: str = ""
    embeddings_path: str = ""
    dataset_path: str = ""
    annotations_path: str = ""
    cache_dir: str = ""
    checkpoint: str = ""
    output_dir: str = "runs/default"
    vocab_path: str = ""
    detector: str = "lexical"
    workers: int = 1

    # model dimensions
    d_model: int = 300
    d_g: int = 64
    d_gru: int = 300
    n_heads: int = 8
    d_head: int = 40
    d_ff: int = 50
    enc_layers: int = 6
    dec_layers: int = 6
    gcn_layers: int = 2
    num_buckets: int = 4
    vocab_size: int = 5000
    max_context_len: int = 256
    max_target_len: int = 32

    # graph construction
    top_k: int = 10
    hops: int = 2
    gamma: float = 0.8
    min_weight: float = 0.0

    # training
    batch_size: int = 32
    lr: float = 1e-4
    lr_decay: float = 1.0
    lr_decay_interval: int = 500
    lr_floor: float = 1e-5
    loss_weight: float = 1.0
    max_steps: int = 2000
    seed: int = 0
    ablation: str = "full"
    beam: int = 5
    validate_every: int = 200
    patience: int = 5
    accuracy_stop: float = 0.0

    # evaluation / generation / tracing
    split: str = "test"
    trace_ids: str = ""

    def validate(self) -> None:
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.beam < 1:
            raise ValueError("beam must be >= 1")
        if self.loss_weight < 0:
            raise ValueError("loss_weight must be >= 0")
        if self.gamma < 0 or self.gamma > 1:
            raise ValueError("gamma must be in [0, 1]")
        for name in ("d_model", "d_g", "d_gru", "n_heads", "d_head", "d_ff",
                     "enc_layers", "dec_layers", "gcn_layers", "top_k", "hops",
                     "batch_size", "vocab_size", "max_context_len",
                     "max_target_len", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.num_buckets < 2:
            raise ValueError("num_buckets must be >= 2")
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even (sinusoidal positions)")

    @property
    def resolved_vocab_path(self) -> str:
        return self.vocab_path or os.path.join(self.output_dir, "vocab.txt")


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_value(key: str, raw: str):
    field = _FIELDS.get(key)
    if field is None:
        raise KeyError(f"unknown configuration key {key!r}")
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    return raw


def load_config(path) -> RunConfig:
    cfg = RunConfig()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            try:
                setattr(cfg, key, _parse_value(key, raw))
            except KeyError:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}") from None
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return cfg


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    for key, raw in overrides.items():
        try:
            setattr(cfg, key, _parse_value(key, raw))
        except KeyError:
            raise ValueError(f"unknown configuration key {key!r}") from None
    return cfg


def resolved_text(cfg: RunConfig) -> str:
    """Fully-resolved config (defaults applied), one key = value per line."""
    lines = []
    for f in dataclasses.fields(RunConfig):
        lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    return "\n".join(lines) + "\n"


def write_resolved(cfg: RunConfig, directory) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "config.resolved")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(resolved_text(cfg))
    return path
