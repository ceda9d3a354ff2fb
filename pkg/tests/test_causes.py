import pytest

from emocause.causes import (
    CauseAnnotation,
    LexicalDetector,
    OracleDetector,
    causal_buckets,
    detect_cause_clauses,
    extract_concepts,
    load_default_lexicon,
)
from emocause.data import load_dataset, make_utterance, Conversation


@pytest.fixture(scope="module")
def lexicon():
    return load_default_lexicon()


def conversation_from(situation, turns, target="ok then .", emotion=4):
    roles = ["speaker" if i % 2 == 0 else "listener" for i in range(len(turns))]
    return Conversation(
        id="t#1",
        emotion_label=emotion,
        situation=make_utterance("situation", situation),
        turns=tuple(make_utterance(r, t) for r, t in zip(roles, turns)),
        target_response=tuple(target.split()),
    )


class TestLexicalDetector:
    def test_single_clause_is_its_own_cause(self, lexicon):
        conv = conversation_from("a quiet night .", ["i saw a shadow ."])
        anns = detect_cause_clauses(conv, LexicalDetector(lexicon))
        assert len(anns) == 1
        assert anns[0].emotion_clause == (1, 0)
        assert (1, 0) in anns[0].cause_clauses

    def test_because_cue_marks_cause(self, lexicon):
        conv = conversation_from(
            "a quiet night .",
            ["it happened because of the wind , i feel scared ."],
        )
        anns = detect_cause_clauses(conv, LexicalDetector(lexicon))
        # second clause is an emotion clause; clause 0 carries the cue
        emotion_ann = anns[1]
        assert (1, 0) in emotion_ann.cause_clauses

    def test_one_annotation_per_immediate_clause(self, lexicon):
        conv = conversation_from(
            "bad day .", ["i lost my keys , i feel awful , what a day ."]
        )
        anns = detect_cause_clauses(conv, LexicalDetector(lexicon))
        assert len(anns) == len(conv.immediate.clauses)
        assert [a.emotion_clause[1] for a in anns] == list(range(len(anns)))

    def test_cause_refs_exist_in_conversation(self, lexicon, corpus10):
        _, path, _ = corpus10
        det = LexicalDetector(lexicon)
        for conv in load_dataset(path, "train"):
            for ann in detect_cause_clauses(conv, det):
                for utt_idx, clause_idx in ann.cause_clauses:
                    assert clause_idx < len(conv.utterance(utt_idx).clauses)


class TestOracleDetector:
    def test_sidecar_passthrough(self, corpus10):
        fx, path, sidecar = corpus10
        det = OracleDetector(sidecar)
        convs = load_dataset(path, "train")
        conv = convs[0]
        anns = detect_cause_clauses(conv, det)
        expected = fx.sidecar[conv.id]
        assert [(a.emotion_clause, list(a.cause_clauses)) for a in anns] == [
            (emo, causes) for emo, causes in expected
        ]

    def test_missing_conversation_identifies_it(self, tmp_path, corpus10):
        _, path, _ = corpus10
        sidecar = tmp_path / "empty.annotations"
        sidecar.write_text("# cause-annotations v1\n", encoding="utf-8")
        det = OracleDetector(sidecar)
        conv = load_dataset(path, "train")[0]
        with pytest.raises(KeyError, match=conv.id):
            detect_cause_clauses(conv, det)


@pytest.fixture(scope="module")
def word_store(tmp_path_factory):
    from emocause.store import load_store

    root = tmp_path_factory.mktemp("wordstore")
    emb = root / "emb.txt"
    emb.write_text(
        "scary 1 0\nshadow 0 1\nnight 1 1\nwind 1 -1\nscared 0.9 0.1\n",
        encoding="utf-8",
    )
    assertions = root / "a.tsv"
    assertions.write_text(
        "relatedto\tshadow\tnight\t1.0\ncauses\twind\tscared\t1.0\n"
        "evokes\tshadow\tscary\t1.0\n",
        encoding="utf-8",
    )
    return load_store(str(assertions), str(emb))


class TestExtractConcepts:
    def test_emotion_clause_content_word(self, lexicon, word_store):
        conv = conversation_from("a night .", ["it was so scary ."])
        ann = CauseAnnotation((1, 0), ((1, 0),), (1.0,))
        sets = extract_concepts(ann, conv, word_store, lexicon)
        assert sets.emotion_concepts == ("scary",)

    def test_all_stopword_cause_clause_is_empty(self, lexicon, word_store):
        conv = conversation_from("so it was .", ["it was so scary ."])
        ann = CauseAnnotation((1, 0), ((0, 0),), (1.0,))
        sets = extract_concepts(ann, conv, word_store, lexicon)
        assert sets.cause_concepts == ()

    def test_token_absent_from_store_is_excluded(self, lexicon, word_store):
        conv = conversation_from("a night .", ["the shadow xylophone scared me ."])
        ann = CauseAnnotation((1, 0), ((1, 0),), (1.0,))
        sets = extract_concepts(ann, conv, word_store, lexicon)
        assert "shadow" in sets.cause_concepts
        assert "xylophone" not in sets.cause_concepts

    def test_duplicates_collapse(self, lexicon, word_store):
        conv = conversation_from("a night .", ["shadow shadow shadow scared me ."])
        ann = CauseAnnotation((1, 0), ((1, 0),), (1.0,))
        sets = extract_concepts(ann, conv, word_store, lexicon)
        assert sets.cause_concepts.count("shadow") == 1


class TestCausalBuckets:
    def make(self, n_causes_for_first_clause, num_buckets=4):
        conv = conversation_from(
            "one two three .", ["four five , six seven eight ."]
        )
        anns = []
        for _ in range(n_causes_for_first_clause):
            anns.append(CauseAnnotation((1, 1), ((1, 0),), (1.0,)))
        return conv, anns

    def test_never_a_cause_is_bucket_zero(self):
        conv, _ = self.make(0)
        buckets = causal_buckets(conv, [], 4)
        assert set(buckets) == {0}

    def test_single_count_is_bucket_one(self):
        conv, anns = self.make(1)
        buckets = causal_buckets(conv, anns, 4)
        # tokens of clause (1, 0): positions 4..6 of CLS + flat context
        assert buckets[0] == 0
        assert buckets[5] == 1

    def test_counts_clamp_to_last_bucket(self):
        conv, anns = self.make(7)
        buckets = causal_buckets(conv, anns, 4)
        assert buckets[5] == 3

    def test_bucket_source_counts_sum_to_pair_count(self, corpus10, lexicon):
        _, path, _ = corpus10
        det = LexicalDetector(lexicon)
        for conv in load_dataset(path, "train")[:5]:
            anns = detect_cause_clauses(conv, det)
            pairs = sum(len(a.cause_clauses) for a in anns)
            counts = {}
            for a in anns:
                for ref in a.cause_clauses:
                    counts[ref] = counts.get(ref, 0) + 1
            assert sum(counts.values()) == pairs

    def test_num_buckets_must_be_at_least_two(self):
        conv, anns = self.make(1)
        with pytest.raises(ValueError):
            causal_buckets(conv, anns, 1)
