"""Cause-clause detection, concept extraction, and causal-frequency buckets.

Every clause of the immediate utterance is an emotion clause.  Cause
detection is pluggable: the oracle detector reads precomputed annotations
from a sidecar file, the lexical detector is a cue/overlap baseline so the
pipeline runs without external model outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources as importlib_resources

from .data import Conversation, flatten_context
from .store import TripleStore

CONTENT_TAGS = frozenset({"noun", "verb", "adj", "adv"})
CAUSAL_CUES = ("because", "since", "after", "when")


class PosLexicon:
    """Bundled word -> tag table; unknown words are treated as nouns."""

    def __init__(self, tags: dict[str, str], stopwords: set[str]):
        self.tags = tags
        self.stopwords = stopwords

    def tag(self, word: str) -> str:
        return self.tags.get(word, "noun")

    def is_content(self, word: str) -> bool:
        if not word or not word[0].isalpha():
            return False
        if word in self.stopwords:
            return False
        return self.tag(word) in CONTENT_TAGS


def load_default_lexicon() -> PosLexicon:
    pkg = importlib_resources.files("emocause.resources")
    tags: dict[str, str] = {}
    for line in (pkg / "pos_lexicon.txt").read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, tag = line.split()
        tags.setdefault(word, tag)
    stopwords = {
        w.strip()
        for w in (pkg / "stopwords.txt").read_text(encoding="utf-8").splitlines()
        if w.strip()
    }
    return PosLexicon(tags, stopwords)


@dataclass(frozen=True)
class CauseAnnotation:
    emotion_clause: tuple[int, int]              # (utterance index, clause index)
    cause_clauses: tuple[tuple[int, int], ...]   # document order, deduplicated
    confidence: tuple[float, ...]


@dataclass(frozen=True)
class ConceptSets:
    emotion_concepts: tuple[str, ...]
    cause_concepts: tuple[str, ...]


class LexicalDetector:
    """Clause is a cause if it shares a content token with the emotion
    clause or contains a causal cue word."""

    name = "lexical"

    def __init__(self, lexicon: PosLexicon | None = None, cues=CAUSAL_CUES):
        self.lexicon = lexicon or load_default_lexicon()
        self.cues = frozenset(cues)

    def annotate(self, conversation: Conversation) -> list[CauseAnnotation]:
        imm_idx = conversation.immediate_index
        immediate = conversation.immediate
        annotations = []
        for c_idx, (s, e) in enumerate(immediate.clauses):
            emo_tokens = {
                t for t in immediate.tokens[s:e] if self.lexicon.is_content(t)
            }
            causes: list[tuple[int, int]] = []
            for utt_idx in range(imm_idx + 1):
                utt = conversation.utterance(utt_idx)
                for cand_idx, (cs, ce) in enumerate(utt.clauses):
                    toks = utt.tokens[cs:ce]
                    overlap = any(
                        self.lexicon.is_content(t) and t in emo_tokens for t in toks
                    )
                    cued = any(t in self.cues for t in toks)
                    if overlap or cued:
                        causes.append((utt_idx, cand_idx))
            annotations.append(
                CauseAnnotation(
                    emotion_clause=(imm_idx, c_idx),
                    cause_clauses=tuple(causes),
                    confidence=tuple(1.0 for _ in causes),
                )
            )
        return annotations


class OracleDetector:
    """Reads precomputed cause annotations from a sidecar file."""

    name = "oracle"

    def __init__(self, path):
        self.path = path
        self.records: dict[str, dict[tuple[int, int], list[tuple[int, int]]]] = {}
        self._parse(path)

    def _parse(self, path) -> None:
        current = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if line.startswith("conversation "):
                    current = line.split(" ", 1)[1]
                    self.records[current] = {}
                elif line.startswith("pair "):
                    if current is None:
                        raise ValueError(f"{path}:{lineno}: pair before conversation")
                    head, _, tail = line[5:].partition("<-")
                    emo_utt, emo_clause = (int(x) for x in head.split())
                    causes = []
                    for ref in tail.split():
                        u, c = ref.split(",")
                        causes.append((int(u), int(c)))
                    self.records[current][(emo_utt, emo_clause)] = causes
                else:
                    raise ValueError(f"{path}:{lineno}: unrecognized line {line!r}")

    def annotate(self, conversation: Conversation) -> list[CauseAnnotation]:
        record = self.records.get(conversation.id)
        if record is None:
            raise KeyError(
                f"oracle annotations missing conversation {conversation.id!r}"
            )
        imm_idx = conversation.immediate_index
        annotations = []
        for c_idx in range(len(conversation.immediate.clauses)):
            key = (imm_idx, c_idx)
            if key not in record:
                raise KeyError(
                    f"oracle annotations for {conversation.id!r} missing emotion "
                    f"clause {key}"
                )
            causes = record[key]
            annotations.append(
                CauseAnnotation(
                    emotion_clause=key,
                    cause_clauses=tuple(causes),
                    confidence=tuple(1.0 for _ in causes),
                )
            )
        return annotations


def detect_cause_clauses(conversation: Conversation, detector) -> list[CauseAnnotation]:
    """One annotation per clause of the immediate utterance, in order."""
    if not conversation.immediate.clauses:
        raise ValueError(f"conversation {conversation.id!r} has no immediate clauses")
    annotations = detector.annotate(conversation)
    for ann in annotations:
        for utt_idx, clause_idx in ann.cause_clauses:
            utt = conversation.utterance(utt_idx)
            if clause_idx >= len(utt.clauses):
                raise ValueError(
                    f"conversation {conversation.id!r}: cause clause "
                    f"({utt_idx}, {clause_idx}) does not exist"
                )
    return annotations


def extract_concepts(
    annotation: CauseAnnotation,
    conversation: Conversation,
    store: TripleStore,
    lexicon: PosLexicon,
) -> ConceptSets:
    """Content tokens of the emotion/cause clauses, restricted to the store."""

    def clause_tokens(utt_idx, clause_idx):
        utt = conversation.utterance(utt_idx)
        s, e = utt.clauses[clause_idx]
        return utt.tokens[s:e]

    def content(tokens):
        # membership in the store's concept set implies an embedding exists
        return [t for t in tokens if lexicon.is_content(t) and t in store]

    emo = content(clause_tokens(*annotation.emotion_clause))
    cas: list[str] = []
    for ref in annotation.cause_clauses:
        cas.extend(content(clause_tokens(*ref)))
    return ConceptSets(
        emotion_concepts=tuple(sorted(set(emo))),
        cause_concepts=tuple(sorted(set(cas))),
    )


def causal_buckets(conversation: Conversation, annotations, num_buckets: int):
    """Per-token causal-frequency bucket ids for [CLS] + flattened context.

    A clause's count is the number of annotations listing it as a cause;
    the bucket is min(count, num_buckets - 1) and every token inherits its
    clause's bucket.  Index 0 of the result is the CLS bucket (always 0).
    """
    if num_buckets < 2:
        raise ValueError(f"num_buckets must be >= 2, got {num_buckets}")
    counts: dict[tuple[int, int], int] = {}
    for ann in annotations:
        for ref in ann.cause_clauses:
            counts[ref] = counts.get(ref, 0) + 1
    flat = flatten_context(conversation)
    buckets = [0]
    for ref in flat.clause_refs:
        buckets.append(min(counts.get(ref, 0), num_buckets - 1))
    return buckets
