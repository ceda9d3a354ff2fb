"""Commonsense triple store and word-embedding table.

The store is loaded once from a tab-separated assertions file plus a text
embedding file, filtered down to single-token lowercase concepts that have
embeddings, and is immutable afterwards.  Edges are stored once and exposed
bidirectionally with a direction flag.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

OUT = "out"
IN = "in"


class StoreFormatError(ValueError):
    """Raised for malformed assertions or embedding files."""


class MissingTokenError(KeyError):
    """Raised when a token has no embedding."""

    def __init__(self, token):
        super().__init__(token)
        self.token = token

    def __str__(self):
        return f"no embedding for token {self.token!r}"


@dataclass(frozen=True)
class Triple:
    head: str
    relation: str
    tail: str
    weight: float = 1.0


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: dict[str, np.ndarray]

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def vector(self, token: str) -> np.ndarray:
        try:
            return self.vectors[token]
        except KeyError:
            raise MissingTokenError(token) from None


@dataclass
class TripleStore:
    concepts: tuple[str, ...]
    relations: tuple[str, ...]
    triples: tuple[Triple, ...]
    table: EmbeddingTable
    kept: int = 0
    dropped: int = 0
    _adjacency: dict[str, tuple[tuple[str, str, str], ...]] = field(default_factory=dict)
    content_hash: str = ""

    def __contains__(self, concept: str) -> bool:
        return concept in self._adjacency or concept in set(self.concepts)


def load_embeddings(path) -> EmbeddingTable:
    """Parse a ``token v1 ... vD`` text file into an EmbeddingTable."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split(" ")
            if len(parts) < 2:
                raise StoreFormatError(f"{path}:{lineno}: expected 'token v1 ... vD'")
            token = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise StoreFormatError(f"{path}:{lineno}: bad number ({exc})") from None
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise StoreFormatError(
                    f"{path}:{lineno}: dimension {vec.shape[0]} != {dim}"
                )
            vectors[token] = vec
    if dim is None:
        raise StoreFormatError(f"{path}: empty embedding file")
    return EmbeddingTable(dimension=int(dim), vectors=vectors)


def _single_token(term: str) -> bool:
    return bool(term) and not any(ch in term for ch in (" ", "\t", "_"))


def load_store(assertions_path, embeddings_path, min_weight: float = 0.0) -> TripleStore:
    """Load the triple store, keeping only embedded single-token concepts.

    Triples below ``min_weight`` or with an unembeddable endpoint are
    dropped (counted in ``store.dropped``).  Duplicate (head, relation,
    tail) entries keep the first occurrence.
    """
    table = load_embeddings(embeddings_path)
    seen: set[tuple[str, str, str]] = set()
    kept_triples: list[Triple] = []
    dropped = 0
    with open(assertions_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise StoreFormatError(
                    f"{assertions_path}:{lineno}: expected "
                    f"'relation<TAB>head<TAB>tail[<TAB>weight]'"
                )
            relation, head, tail = parts[0], parts[1].lower(), parts[2].lower()
            if not relation or not head or not tail:
                raise StoreFormatError(f"{assertions_path}:{lineno}: empty field")
            weight = 1.0
            if len(parts) == 4:
                try:
                    weight = float(parts[3])
                except ValueError:
                    raise StoreFormatError(
                        f"{assertions_path}:{lineno}: bad weight {parts[3]!r}"
                    ) from None
            if weight < 0:
                raise StoreFormatError(f"{assertions_path}:{lineno}: negative weight")
            if (
                weight < min_weight
                or not _single_token(head)
                or not _single_token(tail)
                or head not in table
                or tail not in table
            ):
                dropped += 1
                continue
            key = (head, relation, tail)
            if key in seen:
                continue
            seen.add(key)
            kept_triples.append(Triple(head, relation, tail, weight))
    if not kept_triples:
        raise StoreFormatError(f"{assertions_path}: no usable triples after filtering")

    kept_triples.sort(key=lambda t: (t.head, t.relation, t.tail))
    adjacency: dict[str, list[tuple[str, str, str]]] = {}
    for t in kept_triples:
        adjacency.setdefault(t.head, []).append((t.relation, t.tail, OUT))
        adjacency.setdefault(t.tail, []).append((t.relation, t.head, IN))
    sorted_adj = {
        c: tuple(sorted(entries, key=lambda e: (e[1], e[0], e[2])))
        for c, entries in sorted(adjacency.items())
    }
    concepts = tuple(sorted(sorted_adj))
    relations = tuple(sorted({t.relation for t in kept_triples}))

    digest = hashlib.sha256()
    digest.update(f"dim={table.dimension}\n".encode())
    for t in kept_triples:
        digest.update(f"{t.head}\t{t.relation}\t{t.tail}\t{t.weight!r}\n".encode())

    log.info(
        "loaded store: %d triples kept, %d dropped, %d concepts, %d relations",
        len(kept_triples), dropped, len(concepts), len(relations),
    )
    return TripleStore(
        concepts=concepts,
        relations=relations,
        triples=tuple(kept_triples),
        table=table,
        kept=len(kept_triples),
        dropped=dropped,
        _adjacency=sorted_adj,
        content_hash=digest.hexdigest(),
    )


def neighbors(store: TripleStore, concept: str) -> list[tuple[str, str, str]]:
    """All edges touching ``concept`` as (relation, neighbor, direction).

    Order is lexicographic by neighbor, then relation, then direction;
    unknown concepts yield an empty list.
    """
    return list(store._adjacency.get(concept, ()))


def cosine_similarity(a: str, b: str, table: EmbeddingTable) -> float:
    """Cosine of the two token embeddings; exactly 1.0 for identical tokens.

    Computed in a symmetric order so cosine(a, b) == cosine(b, a) bitwise.
    """
    if a == b:
        if a not in table:
            raise MissingTokenError(a)
        return 1.0
    va, vb = table.vector(a), table.vector(b)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0:
        raise ValueError(f"zero embedding vector for token {a!r}")
    if nb == 0.0:
        raise ValueError(f"zero embedding vector for token {b!r}")
    return float(np.dot(va, vb)) / (na * nb)
