"""Conversation ingestion, clause segmentation, and vocabulary building.

The dataset CSV follows the EmpatheticDialogues layout (one utterance per
row, ``_comma_`` escapes).  One training example is produced per listener
turn: the context is the situation plus all earlier turns, the listener
turn is the target.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass

log = logging.getLogger(__name__)

EMOTIONS = (
    "surprised", "excited", "angry", "proud", "sad", "annoyed", "grateful",
    "lonely", "afraid", "terrified", "guilty", "impressed", "disgusted",
    "hopeful", "confident", "furious", "anxious", "anticipating", "joyful",
    "nostalgic", "disappointed", "prepared", "jealous", "content",
    "devastated", "embarrassed", "sentimental", "caring", "trusting",
    "ashamed", "apprehensive", "faithful",
)
NUM_EMOTIONS = len(EMOTIONS)
EMOTION_INDEX = {name: i for i, name in enumerate(EMOTIONS)}

SPECIALS = ("<cls>", "<sos>", "<eos>", "<pad>", "<unk>")
CLS_ID, SOS_ID, EOS_ID, PAD_ID, UNK_ID = range(5)

SITUATION = "situation"
SPEAKER = "speaker"
LISTENER = "listener"

_DETACH = ".,!?;:"
CLAUSE_DELIMS = frozenset({".", "!", "?", ";", ","})

REQUIRED_COLUMNS = ("conv_id", "utterance_idx", "context", "prompt", "utterance", "split")


@dataclass(frozen=True)
class Utterance:
    speaker_role: str
    tokens: tuple[str, ...]
    clauses: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Conversation:
    id: str
    emotion_label: int
    situation: Utterance
    turns: tuple[Utterance, ...]
    target_response: tuple[str, ...]

    @property
    def immediate_index(self) -> int:
        """Index of the immediate (last) utterance; 0 is the situation."""
        return len(self.turns)

    def utterance(self, index: int) -> Utterance:
        return self.situation if index == 0 else self.turns[index - 1]

    @property
    def immediate(self) -> Utterance:
        return self.utterance(self.immediate_index)


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokenization with trailing punctuation detached."""
    out: list[str] = []
    for raw in text.lower().split():
        tail: list[str] = []
        while len(raw) > 1 and raw[-1] in _DETACH:
            tail.append(raw[-1])
            raw = raw[:-1]
        out.append(raw)
        out.extend(reversed(tail))
    return out


def detokenize(tokens) -> str:
    return " ".join(tokens)


def _is_punct(token: str) -> bool:
    return all(ch in _DETACH for ch in token)


def segment_clauses(tokens) -> list[tuple[int, int]]:
    """Split after . ! ? ; , keeping the delimiter with its clause.

    Spans with fewer than two non-punctuation tokens are merged into the
    previous span (the first span merges forward).  A sequence without
    delimiters is a single clause.
    """
    if not tokens:
        raise ValueError("cannot segment an empty token sequence")
    raw: list[tuple[int, int]] = []
    start = 0
    for i, tok in enumerate(tokens):
        if tok in CLAUSE_DELIMS:
            raw.append((start, i + 1))
            start = i + 1
    if start < len(tokens):
        raw.append((start, len(tokens)))

    def content(span):
        return sum(1 for t in tokens[span[0]:span[1]] if not _is_punct(t))

    merged: list[tuple[int, int]] = []
    carry: tuple[int, int] | None = None
    for span in raw:
        if carry is not None:
            span = (carry[0], span[1])
            carry = None
        if content(span) >= 2:
            merged.append(span)
        elif merged:
            merged[-1] = (merged[-1][0], span[1])
        else:
            carry = span
    if carry is not None:
        merged = [carry]
    return merged


def make_utterance(role: str, text: str) -> Utterance:
    tokens = tuple(tokenize(text))
    clauses = tuple(segment_clauses(tokens)) if tokens else ()
    return Utterance(speaker_role=role, tokens=tokens, clauses=clauses)


def load_dataset(path, split: str) -> list[Conversation]:
    """Load one Conversation per (dialogue, listener turn) pair."""
    if split not in ("train", "valid", "test"):
        raise ValueError(f"unknown split {split!r}")
    dialogues: dict[str, dict] = {}
    order: list[str] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        for row in reader:
            if row["split"] != split:
                continue
            conv_id = row["conv_id"]
            if conv_id not in dialogues:
                dialogues[conv_id] = {
                    "emotion": row["context"],
                    "prompt": row["prompt"].replace("_comma_", ","),
                    "utts": [],
                }
                order.append(conv_id)
            dialogues[conv_id]["utts"].append(
                (int(row["utterance_idx"]), row["utterance"].replace("_comma_", ","))
            )

    conversations: list[Conversation] = []
    for conv_id in order:
        entry = dialogues[conv_id]
        if not entry["utts"]:
            log.warning("dialogue %s has no utterances; skipped", conv_id)
            continue
        emotion = entry["emotion"]
        if emotion not in EMOTION_INDEX:
            raise ValueError(f"dialogue {conv_id}: unknown emotion label {emotion!r}")
        situation = make_utterance(SITUATION, entry["prompt"])
        utts = sorted(entry["utts"])
        # odd 1-based indices are speaker turns, even ones are listener replies
        turns: list[Utterance] = []
        for idx, text in utts:
            role = SPEAKER if idx % 2 == 1 else LISTENER
            target_tokens = tuple(tokenize(text))
            if role == LISTENER:
                if turns and turns[-1].speaker_role == SPEAKER and target_tokens:
                    conversations.append(
                        Conversation(
                            id=f"{conv_id}#{idx}",
                            emotion_label=EMOTION_INDEX[emotion],
                            situation=situation,
                            turns=tuple(turns),
                            target_response=target_tokens,
                        )
                    )
                elif not target_tokens:
                    log.warning("dialogue %s turn %d: empty target; skipped", conv_id, idx)
            if target_tokens:
                turns.append(make_utterance(role, text))
    return conversations


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def encode_all(self, tokens) -> list[int]:
        return [self.index.get(t, UNK_ID) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self.tokens:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            tokens = tuple(line.rstrip("\n") for line in fh if line.rstrip("\n"))
        if tokens[:5] != SPECIALS:
            raise ValueError(f"{path}: not a vocabulary file (bad specials)")
        return cls(tokens=tokens, index={t: i for i, t in enumerate(tokens)})


def build_vocabulary(conversations, max_size: int) -> Vocabulary:
    """Specials plus the most frequent tokens, capped at max_size entries.

    Ties break lexicographically; the result is a pure function of the
    input conversations.
    """
    if max_size < 6:
        raise ValueError(f"max_size must be at least 6, got {max_size}")
    counts: Counter = Counter()
    for conv in conversations:
        counts.update(conv.situation.tokens)
        for turn in conv.turns:
            counts.update(turn.tokens)
        counts.update(conv.target_response)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    tokens = list(SPECIALS) + [tok for tok, _ in ranked[: max_size - len(SPECIALS)]]
    return Vocabulary(tokens=tuple(tokens), index={t: i for i, t in enumerate(tokens)})


@dataclass(frozen=True)
class FlatContext:
    """Flattened conversation context, aligned position by position."""

    tokens: tuple[str, ...]          # without CLS
    state_tags: tuple[str, ...]      # situation | speaker | listener
    clause_refs: tuple[tuple[int, int], ...]  # (utterance index, clause index)


def flatten_context(conversation: Conversation) -> FlatContext:
    """Situation plus all turns, flattened in order, per-token provenance."""
    tokens: list[str] = []
    tags: list[str] = []
    refs: list[tuple[int, int]] = []
    for utt_idx in range(conversation.immediate_index + 1):
        utt = conversation.utterance(utt_idx)
        clause_of: dict[int, int] = {}
        for c_idx, (s, e) in enumerate(utt.clauses):
            for pos in range(s, e):
                clause_of[pos] = c_idx
        for pos, tok in enumerate(utt.tokens):
            tokens.append(tok)
            tags.append(utt.speaker_role)
            refs.append((utt_idx, clause_of.get(pos, 0)))
    return FlatContext(tokens=tuple(tokens), state_tags=tuple(tags), clause_refs=tuple(refs))
