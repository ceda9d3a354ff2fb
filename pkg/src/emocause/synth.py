"""Synthetic dialogue corpus and matching triple-store fixtures.

Template dialogues with known emotion labels and planted cause clauses,
emitted in the same CSV format as the real dataset, plus a small
commonsense store whose embeddings make the planted cause -> intermediate
-> emotion paths the highest-similarity expansions.  Tests and the
acceptance suite run entirely on these fixtures.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import make_utterance

CAUSES_REL = "causes"
EVOKES_REL = "evokes"
RELATED_REL = "relatedto"


@dataclass(frozen=True)
class Scenario:
    emotion: str        # label word from the 32-way set
    cause: str          # planted cause concept
    mid: str            # intermediate concept on the path to the emotion
    emo_word: str       # emotion concept appearing in the emotion clause
    distractor: str     # low-similarity neighbour competing with mid
    noun: str


SCENARIOS = (
    Scenario("terrified", "shadow", "darkness", "scared", "wall", "door"),
    Scenario("joyful", "party", "friends", "happy", "cake", "house"),
    Scenario("sad", "loss", "grief", "lonely", "rain", "letter"),
    Scenario("angry", "insult", "rage", "furious", "noise", "phone"),
    Scenario("surprised", "gift", "wonder", "amazed", "box", "table"),
    Scenario("afraid", "storm", "thunder", "fearful", "puddle", "window"),
    Scenario("grateful", "help", "kindness", "thankful", "coin", "neighbor"),
    Scenario("disgusted", "hair", "filth", "gross", "pizza", "plate"),
)

_UNIQ = (
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
    "india", "juliet", "kilo", "lima", "mike", "november", "oscar", "papa",
    "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey",
    "xray", "yankee", "zulu", "amber", "birch", "cedar", "dune", "ember",
    "fjord", "grove", "harbor", "inlet", "jetty", "knoll", "lagoon", "mesa",
    "nook", "oasis", "prairie", "quarry", "ridge", "summit", "tundra",
    "upland", "valley", "wharf", "yonder",
)
_PLACES = ("kitchen", "garden", "station", "market", "school", "office",
           "bridge", "harbor2", "attic", "garage", "porch", "cellar")
_TIMES = ("yesterday", "today", "tonight", "monday", "friday", "sunday",
          "morning", "evening")
_TRIGGERS = ("dark", "wind", "crowd", "smell", "silence", "heat", "cold", "dust")


@dataclass
class CorpusFixture:
    rows: list[dict] = field(default_factory=list)
    sidecar: dict[str, list[tuple[tuple[int, int], list[tuple[int, int]]]]] = field(
        default_factory=dict
    )

    def tokens(self) -> set[str]:
        out: set[str] = set()
        for row in self.rows:
            for cell in (row["prompt"], row["utterance"]):
                out.update(make_utterance("speaker", cell.replace("_comma_", ",")).tokens)
        return out


def _immediate_clause_pairs(text: str, utt_index: int, cause_refs):
    """Sidecar record: every clause of the immediate utterance gets causes."""
    utt = make_utterance("speaker", text)
    pairs = []
    for clause_idx in range(len(utt.clauses)):
        pairs.append(((utt_index, clause_idx), list(cause_refs(clause_idx))))
    return pairs


def generate_corpus(num_dialogues: int, seed: int = 0, exchanges=None,
                    split: str = "train") -> CorpusFixture:
    """Template dialogues; ``exchanges`` maps dialogue index -> reply count.

    The default pattern gives dialogue i two exchanges, or three when
    i % 3 == 1 (so 10 dialogues yield 23 conversations).
    """
    rng = np.random.default_rng(seed)
    fixture = CorpusFixture()
    uniq_iter = iter(_UNIQ * (1 + num_dialogues))
    for i in range(num_dialogues):
        sc = SCENARIOS[i % len(SCENARIOS)]
        n_ex = exchanges(i) if exchanges is not None else (3 if i % 3 == 1 else 2)
        conv_id = f"syn{seed}d{i:04d}"
        place = _PLACES[int(rng.integers(len(_PLACES)))]
        timeword = _TIMES[int(rng.integers(len(_TIMES)))]
        trigger = _TRIGGERS[int(rng.integers(len(_TRIGGERS)))]
        uniq0 = next(uniq_iter)
        situation = (
            f"my {sc.noun} {uniq0} saw the {sc.cause} near the {place} {timeword} ."
        )
        utt_rows: list[str] = []
        first_speaker = (
            f"the {sc.cause} appeared because of the {trigger} , "
            f"i feel so {sc.emo_word} ."
        )
        first_reply = f"oh {uniq0} , that {sc.cause} sounds {sc.emo_word} , be safe ."
        utt_rows.extend([first_speaker, first_reply])
        uniq_prev = uniq0
        for _ in range(1, n_ex):
            uniq = next(uniq_iter)
            utt_rows.append(
                f"yes {uniq} , the {sc.mid} made it worse , i am still {sc.emo_word} ."
            )
            utt_rows.append(
                f"i hope the {sc.mid} fades soon {uniq} , rest well ."
            )
            uniq_prev = uniq
        del uniq_prev

        for j, text in enumerate(utt_rows, start=1):
            fixture.rows.append(
                {
                    "conv_id": conv_id,
                    "utterance_idx": j,
                    "context": sc.emotion,
                    "prompt": situation.replace(",", "_comma_"),
                    "utterance": text.replace(",", "_comma_"),
                    "split": split,
                }
            )

        # planted annotations: the because-clause (clause 0 of the immediate
        # speaker turn) and the situation clause cause every emotion clause
        for e in range(n_ex):
            listener_idx = 2 * e + 2
            immediate_utt = 2 * e + 1  # utterance index: 0 situation, 1.. turns
            text = utt_rows[2 * e]

            def cause_refs(clause_idx, immediate_utt=immediate_utt):
                refs = [(immediate_utt, 0)]
                if clause_idx != 0:
                    refs.append((0, 0))
                return refs

            fixture.sidecar[f"{conv_id}#{listener_idx}"] = _immediate_clause_pairs(
                text, immediate_utt, cause_refs
            )
    return fixture


def write_corpus_csv(fixture: CorpusFixture, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["conv_id", "utterance_idx", "context", "prompt",
                            "utterance", "split"]
        )
        writer.writeheader()
        for row in fixture.rows:
            writer.writerow(row)


def write_sidecar(fixture: CorpusFixture, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# cause-annotations v1\n")
        for conv_id, pairs in fixture.sidecar.items():
            fh.write(f"conversation {conv_id}\n")
            for (emo_utt, emo_clause), causes in pairs:
                refs = " ".join(f"{u},{c}" for u, c in causes)
                fh.write(f"pair {emo_utt} {emo_clause} <- {refs}\n")


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def store_vocabulary() -> set[str]:
    out: set[str] = set()
    for sc in SCENARIOS:
        out.update({sc.cause, sc.mid, sc.emo_word, sc.distractor})
    return out


def write_store_files(assertions_path, embeddings_path, dim: int, seed: int = 0,
                      extra_tokens=()) -> None:
    """Scenario store: cause -> mid -> emotion paths plus distractor edges.

    Embeddings put each mid close to its emotion word (cosine ~0.9) so
    top-K expansion prefers the planted path; distractors stay near
    orthogonal.  ``extra_tokens`` also get (random) embeddings so the
    corpus vocabulary can share this table.
    """
    rng = np.random.default_rng(seed)
    vectors: dict[str, np.ndarray] = {}

    def vec(token):
        if token not in vectors:
            vectors[token] = _unit(rng, dim)
        return vectors[token]

    lines = []
    for sc in SCENARIOS:
        emo_v = vec(sc.emo_word)
        mid_v = 0.85 * emo_v + 0.15 * _unit(rng, dim)
        vectors[sc.mid] = mid_v / np.linalg.norm(mid_v)
        vec(sc.cause)
        vec(sc.distractor)
        lines.append((CAUSES_REL, sc.cause, sc.mid, 2.0))
        lines.append((EVOKES_REL, sc.mid, sc.emo_word, 2.0))
        lines.append((RELATED_REL, sc.cause, sc.distractor, 1.0))
        lines.append((RELATED_REL, sc.mid, sc.distractor, 0.5))
    for token in extra_tokens:
        vec(token)

    with open(assertions_path, "w", encoding="utf-8") as fh:
        fh.write("# synthetic assertions\n")
        for rel, head, tail, w in lines:
            fh.write(f"{rel}\t{head}\t{tail}\t{w}\n")
    with open(embeddings_path, "w", encoding="utf-8") as fh:
        for token in sorted(vectors):
            vals = " ".join(f"{x:.8f}" for x in vectors[token])
            fh.write(f"{token} {vals}\n")


def write_disjoint_store_files(assertions_path, embeddings_path, dim: int,
                               seed: int = 0) -> None:
    """A store sharing no tokens with the synthetic corpus (empty graphs)."""
    rng = np.random.default_rng(seed)
    tokens = ["lumen", "umbra", "ventus", "silva", "flumen", "petra", "nimbus", "aether"]
    with open(assertions_path, "w", encoding="utf-8") as fh:
        for i in range(len(tokens) - 1):
            fh.write(f"{RELATED_REL}\t{tokens[i]}\t{tokens[i + 1]}\t1.0\n")
    with open(embeddings_path, "w", encoding="utf-8") as fh:
        for token in tokens:
            vals = " ".join(f"{x:.8f}" for x in _unit(rng, dim))
            fh.write(f"{token} {vals}\n")
