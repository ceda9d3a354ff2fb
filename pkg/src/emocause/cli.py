"""Command-line entry point.

Subcommands: build-graphs, train, evaluate, generate, trace.  All state
flows through the flat config file plus ``--key value`` overrides; no
environment variables are consulted.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
import tempfile
import time

import numpy as np

from . import metrics
from .beam import beam_search
from .config import RunConfig, apply_overrides, load_config, write_resolved
from .data import EOS_ID, load_dataset
from .model import format_trace, greedy_trace_decode
from .nn import no_grad, save_checkpoint
from .pipeline import (
    build_graph_cache,
    build_or_load_vocab,
    make_model,
    open_store,
    prepare_split,
)
from .train import teacher_forced_stats, train

SUBCOMMANDS = ("build-graphs", "train", "evaluate", "generate", "trace")


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="emocause",
        description="Emotional-causality graph dialogue model",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="flat key = value file")
    parser.add_argument("--stdin", action="store_true",
                        help="generate: read one dialogue CSV from stdin")
    # remaining --key value pairs override config entries
    args, rest = parser.parse_known_args(argv)
    args.overrides = rest
    return args


def _collect_overrides(pairs) -> dict:
    if len(pairs) % 2 != 0:
        raise ValueError("overrides must come in --key value pairs")
    out = {}
    for key, value in zip(pairs[0::2], pairs[1::2]):
        if not key.startswith("--"):
            raise ValueError(f"expected --key, got {key!r}")
        out[key[2:]] = value
    return out


def _require_paths(cfg: RunConfig, *names) -> None:
    for name in names:
        path = getattr(cfg, name)
        if not path:
            raise ValueError(f"{name} must be set")
        if not os.path.exists(path):
            raise FileNotFoundError(f"{name}: no such file {path}")


def _header(fh) -> None:
    fh.write(f"# run {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")


def _decode_split(model, examples, beam_width):
    pairs = []
    with no_grad():
        for ex in examples:
            dc = model.decode_context(ex)
            ids = beam_search(lambda prefix: model.step_logprobs(dc, prefix),
                              beam_width, model.cfg.max_target_len)
            pairs.append((ex, ids))
    return pairs


def cmd_build_graphs(cfg: RunConfig) -> int:
    _require_paths(cfg, "store_path", "embeddings_path", "dataset_path")
    stats = build_graph_cache(cfg)
    total = stats["conversations"]
    hit_pct = 100.0 * stats["hits"] / total if total else 0.0
    print(
        f"graphs: {stats['graphs']} over {stats['conversations']} conversations; "
        f"nodes: {stats['nodes']}; edges: {stats['edges']}; "
        f"cache hits: {stats['hits']}/{total} ({hit_pct:.0f}%)"
    )
    return 0


def cmd_train(cfg: RunConfig) -> int:
    _require_paths(cfg, "store_path", "embeddings_path", "dataset_path")
    os.makedirs(cfg.output_dir, exist_ok=True)
    store = open_store(cfg)
    vocab = build_or_load_vocab(cfg, store)
    train_examples, _ = prepare_split(cfg, "train", vocab, store)
    valid_examples, _ = prepare_split(cfg, "valid", vocab, store)
    model = make_model(cfg, vocab, store)
    checkpoint = cfg.checkpoint or os.path.join(cfg.output_dir, "model.ckpt")
    log_path = os.path.join(cfg.output_dir, "metrics.log")
    with open(log_path, "w", encoding="utf-8") as fh:
        _header(fh)
        result = train(model, train_examples, cfg,
                       valid_examples=valid_examples or None,
                       checkpoint_path=checkpoint, log_stream=fh)
    save_checkpoint(checkpoint, model.registry)
    stats = teacher_forced_stats(model, train_examples)
    print(
        f"trained {result.steps} steps; train ppl {stats['ppl']:.4f}; "
        f"token accuracy {stats['token_accuracy']:.4f}; checkpoint {checkpoint}"
    )
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    _require_paths(cfg, "store_path", "embeddings_path", "dataset_path")
    os.makedirs(cfg.output_dir, exist_ok=True)
    store = open_store(cfg)
    vocab = build_or_load_vocab(cfg, store)
    model = make_model(cfg, vocab, store)
    examples, _ = prepare_split(cfg, cfg.split, vocab, store)
    if not examples:
        raise ValueError(f"split {cfg.split!r} is empty")
    stats = teacher_forced_stats(model, examples)
    pairs = _decode_split(model, examples, cfg.beam)
    hyps = [vocab.decode(ids) for _, ids in pairs]
    refs = [list(ex.conversation.target_response) for ex, _ in pairs]
    bleu_score = metrics.bleu(hyps, refs)
    report_path = os.path.join(cfg.output_dir, "report.txt")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(f"ppl = {stats['ppl']:.6f}\n")
        fh.write(f"bleu = {bleu_score:.6f}\n")
        fh.write(f"emotion_accuracy = {stats['emotion_accuracy']:.6f}\n")
    print(f"ppl = {stats['ppl']:.6f}")
    print(f"bleu = {bleu_score:.6f}")
    print(f"emotion_accuracy = {stats['emotion_accuracy']:.6f}")
    return 0


def cmd_generate(cfg: RunConfig, from_stdin: bool = False) -> int:
    _require_paths(cfg, "store_path", "embeddings_path")
    os.makedirs(cfg.output_dir, exist_ok=True)
    store = open_store(cfg)
    vocab = build_or_load_vocab(cfg, store)
    model = make_model(cfg, vocab, store)
    if from_stdin:
        text = sys.stdin.read()
        with tempfile.NamedTemporaryFile(
                "w", suffix=".csv", delete=False, encoding="utf-8") as fh:
            fh.write(text)
            tmp_path = fh.name
        try:
            piped = load_dataset(tmp_path, cfg.split)
            cfg_piped = cfg
            old_dataset = cfg_piped.dataset_path
            cfg_piped.dataset_path = tmp_path
            examples, _ = prepare_split(cfg_piped, cfg.split, vocab, store)
            cfg_piped.dataset_path = old_dataset
            del piped
        finally:
            os.unlink(tmp_path)
    else:
        _require_paths(cfg, "dataset_path")
        examples, _ = prepare_split(cfg, cfg.split, vocab, store)
    pairs = _decode_split(model, examples, cfg.beam)
    out_path = os.path.join(cfg.output_dir, "generated.txt")
    with open(out_path, "w", encoding="utf-8") as fh:
        for ex, ids in pairs:
            fh.write(f"{ex.id}\t{' '.join(vocab.decode(ids))}\n")
    for ex, ids in pairs:
        print(f"{ex.id}\t{' '.join(vocab.decode(ids))}")
    return 0


def cmd_trace(cfg: RunConfig) -> int:
    _require_paths(cfg, "store_path", "embeddings_path", "dataset_path")
    os.makedirs(cfg.output_dir, exist_ok=True)
    wanted = [x for x in cfg.trace_ids.split(",") if x]
    if not wanted:
        raise ValueError("trace requires trace_ids (comma-separated)")
    store = open_store(cfg)
    vocab = build_or_load_vocab(cfg, store)
    model = make_model(cfg, vocab, store)
    examples, _ = prepare_split(cfg, cfg.split, vocab, store)
    by_id = {ex.id: ex for ex in examples}
    out_path = os.path.join(cfg.output_dir, "trace.txt")
    buffer = io.StringIO()
    with no_grad():
        for conv_id in wanted:
            if conv_id not in by_id:
                raise KeyError(f"conversation {conv_id!r} not found in split "
                               f"{cfg.split!r}")
            ids, steps = greedy_trace_decode(model, by_id[conv_id],
                                             model.cfg.max_target_len)
            shown = ids if not ids or ids[-1] != EOS_ID else ids
            buffer.write(format_trace(conv_id, steps, shown, vocab))
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(buffer.getvalue())
    print(f"trace written to {out_path}")
    return 0


def run(subcommand: str, config_path: str, overrides: dict | None = None,
        from_stdin: bool = False) -> int:
    cfg = load_config(config_path)
    apply_overrides(cfg, overrides or {})
    cfg.validate()
    np.random.seed(cfg.seed % (2 ** 32))
    write_resolved(cfg, cfg.output_dir)
    if subcommand == "build-graphs":
        return cmd_build_graphs(cfg)
    if subcommand == "train":
        return cmd_train(cfg)
    if subcommand == "evaluate":
        return cmd_evaluate(cfg)
    if subcommand == "generate":
        return cmd_generate(cfg, from_stdin=from_stdin)
    if subcommand == "trace":
        return cmd_trace(cfg)
    raise ValueError(f"unknown subcommand {subcommand!r}")


def main(argv=None) -> int:
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    try:
        overrides = _collect_overrides(args.overrides)
        return run(args.subcommand, args.config, overrides, from_stdin=args.stdin)
    except (ValueError, KeyError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: one-line reason, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
