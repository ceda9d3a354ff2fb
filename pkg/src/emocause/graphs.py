"""Emotional-causality graph construction over the triple store.

One graph per emotion clause: cause concepts start at depth 0, each hop
expands the frontier to the K unvisited neighbour concepts most similar to
any emotion concept, and emotion concepts are terminal (never expanded).
Intermediate concepts are kept even when no path reaches an emotion
concept.
"""

from __future__ import annotations

import logging
import os
import re
import tempfile
from dataclasses import dataclass, field

from .causes import ConceptSets, extract_concepts, load_default_lexicon
from .store import EmbeddingTable, TripleStore, cosine_similarity, neighbors

log = logging.getLogger(__name__)

CAUSE = "cause"
EMOTION = "emotion"
INTERMEDIATE = "intermediate"

CACHE_VERSION = "ecgraphs 1"


@dataclass(frozen=True)
class GraphNode:
    token: str
    role: str
    depth: int


@dataclass(frozen=True)
class GraphEdge:
    src: str
    relation: str
    dst: str
    hop: int


@dataclass(frozen=True)
class CausalityGraph:
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    provenance: tuple[int, int]  # (utterance index, clause index)
    empty_cause_warning: bool = False

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(n.token for n in self.nodes)

    def node_index(self) -> dict[str, int]:
        return {n.token: i for i, n in enumerate(self.nodes)}


def expand_hop(
    store: TripleStore,
    frontier,
    visited,
    emotion_concepts,
    K: int,
    table: EmbeddingTable,
):
    """One synchronized expansion round.

    Candidates are all edges from frontier concepts to unvisited
    neighbours; each candidate tail is scored by its maximum cosine
    similarity to any emotion concept (0 when there are none) and the top
    K tails win.  Returns (selected triples in candidate order, ranked
    selected tails, new frontier).
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    emotion_concepts = set(emotion_concepts)
    if set(frontier) & emotion_concepts:
        raise ValueError("frontier must not contain emotion concepts")
    candidates: list[tuple[str, str, str]] = []  # (src, relation, tail)
    tails: set[str] = set()
    for concept in sorted(frontier):
        for relation, neighbor, _direction in neighbors(store, concept):
            if neighbor in visited:
                continue
            candidates.append((concept, relation, neighbor))
            tails.add(neighbor)
    if not candidates:
        return [], [], set()

    def similarity(tail):
        if not emotion_concepts:
            return 0.0
        return max(cosine_similarity(tail, emo, table) for emo in emotion_concepts)

    ranked = sorted(tails, key=lambda t: (-similarity(t), t))[:K]
    selected = set(ranked)
    kept = [c for c in candidates if c[2] in selected]
    new_frontier = selected - emotion_concepts
    return kept, ranked, new_frontier


def build_graph(
    store: TripleStore,
    concepts: ConceptSets,
    K: int,
    H: int,
    table: EmbeddingTable | None = None,
    provenance: tuple[int, int] = (0, 0),
) -> CausalityGraph:
    """Run H expansion hops from the cause concepts."""
    if K < 1 or H < 1:
        raise ValueError(f"K and H must be >= 1, got K={K} H={H}")
    table = table or store.table
    v_cas = [c for c in concepts.cause_concepts if c in table]
    v_emo = set(c for c in concepts.emotion_concepts if c in table)
    if not v_cas:
        return CausalityGraph(
            nodes=(), edges=(), provenance=provenance, empty_cause_warning=True
        )

    nodes: list[GraphNode] = [GraphNode(c, CAUSE, 0) for c in sorted(set(v_cas))]
    edges: list[GraphEdge] = []
    visited = {n.token for n in nodes}
    frontier = {n.token for n in nodes} - v_emo
    for hop in range(1, H + 1):
        if not frontier:
            break
        kept, ranked, frontier = expand_hop(
            store, frontier, visited, v_emo, K, table
        )
        for tail in ranked:
            role = EMOTION if tail in v_emo else INTERMEDIATE
            nodes.append(GraphNode(tail, role, hop))
        for src, relation, dst in kept:
            edges.append(GraphEdge(src, relation, dst, hop))
        visited.update(ranked)
    return CausalityGraph(
        nodes=tuple(nodes), edges=tuple(edges), provenance=provenance
    )


def build_all_graphs(
    conversation,
    annotations,
    store: TripleStore,
    K: int,
    H: int,
    lexicon=None,
    cache_dir=None,
) -> list[CausalityGraph]:
    """One graph per emotion clause, in clause order, optionally disk-cached."""
    graphs, _hit = build_all_graphs_cached(
        conversation, annotations, store, K, H, lexicon=lexicon, cache_dir=cache_dir
    )
    return graphs


def build_all_graphs_cached(
    conversation,
    annotations,
    store: TripleStore,
    K: int,
    H: int,
    lexicon=None,
    cache_dir=None,
):
    """Like build_all_graphs but also reports whether the cache was hit."""
    cache = GraphCache(cache_dir, store.content_hash, K, H) if cache_dir else None
    if cache is not None:
        cached = cache.load(conversation.id)
        if cached is not None:
            return cached, True
    lexicon = lexicon or load_default_lexicon()
    graphs = []
    for ann in annotations:
        concepts = extract_concepts(ann, conversation, store, lexicon)
        graphs.append(
            build_graph(
                store, concepts, K, H, table=store.table,
                provenance=ann.emotion_clause,
            )
        )
    if cache is not None:
        cache.store(conversation.id, graphs)
    return graphs, False


def graphs_to_text(conversation_id: str, graphs, key: str) -> str:
    lines = [CACHE_VERSION, f"conversation {conversation_id}", f"key {key}"]
    for g in graphs:
        flags = " warning" if g.empty_cause_warning else ""
        lines.append(
            f"graph clause={g.provenance[0]},{g.provenance[1]} "
            f"nodes={len(g.nodes)} edges={len(g.edges)}{flags}"
        )
        for n in g.nodes:
            lines.append(f"node {n.token} {n.role} {n.depth}")
        for e in g.edges:
            lines.append(f"edge {e.src} {e.relation} {e.dst} {e.hop}")
        lines.append("endgraph")
    return "\n".join(lines) + "\n"


def graphs_from_text(text: str):
    lines = text.splitlines()
    if not lines or lines[0] != CACHE_VERSION:
        raise ValueError("bad cache version")
    if not lines[1].startswith("conversation ") or not lines[2].startswith("key "):
        raise ValueError("bad cache header")
    key = lines[2][4:]
    graphs = []
    i = 3
    while i < len(lines):
        header = lines[i]
        match = re.match(
            r"graph clause=(\d+),(\d+) nodes=(\d+) edges=(\d+)( warning)?$", header
        )
        if not match:
            raise ValueError(f"bad graph header {header!r}")
        utt, clause, n_nodes, n_edges = (int(match.group(k)) for k in range(1, 5))
        i += 1
        nodes = []
        for _ in range(n_nodes):
            _, token, role, depth = lines[i].split()
            nodes.append(GraphNode(token, role, int(depth)))
            i += 1
        edges = []
        for _ in range(n_edges):
            _, src, relation, dst, hop = lines[i].split()
            edges.append(GraphEdge(src, relation, dst, int(hop)))
            i += 1
        if lines[i] != "endgraph":
            raise ValueError("missing endgraph")
        i += 1
        graphs.append(
            CausalityGraph(
                nodes=tuple(nodes),
                edges=tuple(edges),
                provenance=(utt, clause),
                empty_cause_warning=bool(match.group(5)),
            )
        )
    return key, graphs


@dataclass
class GraphCache:
    """Per-conversation text records keyed by (K, H, store hash)."""

    directory: str
    store_hash: str
    K: int
    H: int
    hits: int = field(default=0)
    misses: int = field(default=0)

    @property
    def key(self) -> str:
        return f"K={self.K} H={self.H} store={self.store_hash}"

    def _path(self, conversation_id: str) -> str:
        safe = re.sub(r"[^A-Za-z0-9_#-]", "_", conversation_id)
        return os.path.join(self.directory, f"{safe}.graphs")

    def load(self, conversation_id: str):
        path = self._path(conversation_id)
        if not os.path.exists(path):
            self.misses += 1
            return None
        try:
            with open(path, encoding="utf-8") as fh:
                key, graphs = graphs_from_text(fh.read())
        except (ValueError, OSError, IndexError) as exc:
            log.warning("graph cache %s corrupt (%s); rebuilding", path, exc)
            self.misses += 1
            return None
        if key != self.key:
            self.misses += 1
            return None
        self.hits += 1
        return graphs

    def store(self, conversation_id: str, graphs) -> None:
        os.makedirs(self.directory, exist_ok=True)
        path = self._path(conversation_id)
        text = graphs_to_text(conversation_id, graphs, self.key)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
