"""Wiring between ingestion, annotation, graph building, and the model."""

from __future__ import annotations

import logging
import multiprocessing
import os

from .causes import (
    LexicalDetector,
    OracleDetector,
    detect_cause_clauses,
    extract_concepts,
    load_default_lexicon,
)
from .config import RunConfig
from .data import Vocabulary, build_vocabulary, load_dataset
from .graphs import build_all_graphs_cached
from .model import EncodedConversation, ResponseModel, prepare_conversation
from .nn import load_checkpoint
from .store import TripleStore, load_store

log = logging.getLogger(__name__)


def make_detector(cfg: RunConfig, lexicon=None):
    if cfg.detector == "oracle":
        if not cfg.annotations_path:
            raise ValueError("oracle detector requires annotations_path")
        return OracleDetector(cfg.annotations_path)
    return LexicalDetector(lexicon=lexicon)


def open_store(cfg: RunConfig) -> TripleStore:
    return load_store(cfg.store_path, cfg.embeddings_path, cfg.min_weight)


def _prepare_one(conversation, vocab, store, detector, lexicon, cfg,
                 cache_dir) -> tuple[EncodedConversation, bool]:
    annotations = detect_cause_clauses(conversation, detector)
    concept_sets = [
        extract_concepts(ann, conversation, store, lexicon) for ann in annotations
    ]
    if cfg.ablation == "no_graph":
        graphs, hit = [], False
    else:
        graphs, hit = build_all_graphs_cached(
            conversation, annotations, store, cfg.top_k, cfg.hops,
            lexicon=lexicon, cache_dir=cache_dir or None,
        )
    ex = prepare_conversation(conversation, vocab, annotations, concept_sets,
                              graphs, cfg)
    return ex, hit


def prepare_split(cfg: RunConfig, split: str, vocab: Vocabulary,
                  store: TripleStore, detector=None, lexicon=None):
    """Encoded examples for one split plus the graph-cache hit count."""
    lexicon = lexicon or load_default_lexicon()
    detector = detector or make_detector(cfg, lexicon)
    conversations = load_dataset(cfg.dataset_path, split)
    examples: list[EncodedConversation] = []
    hits = 0
    for conv in conversations:
        ex, hit = _prepare_one(conv, vocab, store, detector, lexicon, cfg,
                               cfg.cache_dir)
        examples.append(ex)
        hits += int(hit)
    return examples, hits


def _graph_worker(args):
    conversations, cfg, store, detector, lexicon = args
    hits = 0
    nodes = edges = 0
    for conv in conversations:
        annotations = detect_cause_clauses(conv, detector)
        graphs, hit = build_all_graphs_cached(
            conv, annotations, store, cfg.top_k, cfg.hops,
            lexicon=lexicon, cache_dir=cfg.cache_dir,
        )
        hits += int(hit)
        nodes += sum(len(g.nodes) for g in graphs)
        edges += sum(len(g.edges) for g in graphs)
    return hits, nodes, edges


def build_graph_cache(cfg: RunConfig, splits=("train", "valid", "test")) -> dict:
    """Populate the graph cache for every conversation of the given splits."""
    if not cfg.cache_dir:
        raise ValueError("build-graphs requires cache_dir")
    store = open_store(cfg)
    lexicon = load_default_lexicon()
    detector = make_detector(cfg, lexicon)
    stats = {"conversations": 0, "graphs": 0, "nodes": 0, "edges": 0, "hits": 0}
    for split in splits:
        conversations = load_dataset(cfg.dataset_path, split)
        if not conversations:
            continue
        stats["conversations"] += len(conversations)
        stats["graphs"] += sum(len(c.immediate.clauses) for c in conversations)
        if cfg.workers > 1:
            chunks = [conversations[i::cfg.workers] for i in range(cfg.workers)]
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(cfg.workers) as pool:
                results = pool.map(
                    _graph_worker,
                    [(chunk, cfg, store, detector, lexicon) for chunk in chunks if chunk],
                )
            for hits, nodes, edges in results:
                stats["hits"] += hits
                stats["nodes"] += nodes
                stats["edges"] += edges
        else:
            hits, nodes, edges = _graph_worker(
                (conversations, cfg, store, detector, lexicon))
            stats["hits"] += hits
            stats["nodes"] += nodes
            stats["edges"] += edges
    return stats


def build_or_load_vocab(cfg: RunConfig, store: TripleStore) -> Vocabulary:
    path = cfg.resolved_vocab_path
    if os.path.exists(path):
        return Vocabulary.load(path)
    conversations = load_dataset(cfg.dataset_path, "train")
    vocab = build_vocabulary(conversations, cfg.vocab_size)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    vocab.save(path)
    return vocab


def make_model(cfg: RunConfig, vocab: Vocabulary, store: TripleStore) -> ResponseModel:
    model = ResponseModel(cfg, vocab, store)
    if cfg.checkpoint and os.path.exists(cfg.checkpoint):
        model.registry.load_state(load_checkpoint(cfg.checkpoint))
        log.info("loaded checkpoint %s", cfg.checkpoint)
    return model
