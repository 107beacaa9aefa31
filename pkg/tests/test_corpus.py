from __future__ import annotations

import json

import pytest

from zerorte.corpus import (
    CorpusError,
    Dataset,
    RelationTriplet,
    Sample,
    dataset_stats,
    diversity_stats,
    load_fold,
    load_jsonl,
    save_fold,
    split_zero_shot,
    write_jsonl,
)

FIG_LINE = {
    "sentence": "Nicolas Tindal was promoted to Captain.",
    "triplets": [{"head": "Nicolas Tindal", "tail": "Captain", "label": "Military Rank"}],
}


def make_dataset(rows):
    samples = []
    for sentence, triplets in rows:
        samples.append(
            Sample(sentence, tuple(RelationTriplet(h, t, l) for h, t, l in triplets))
        )
    return Dataset(tuple(samples))


def toy_eight_labels():
    rows = []
    for i in range(8):
        label = f"rel{i}"
        for j in range(3):
            ent = f"e{i}{j}"
            rows.append((f"{ent} maps to x{i} item {j}", [(ent, f"x{i}", label)]))
    return make_dataset(rows)


class TestTypes:
    def test_triplet_rejects_empty_fields(self):
        with pytest.raises(CorpusError):
            RelationTriplet("", "b", "c")
        with pytest.raises(CorpusError):
            RelationTriplet("a", "b", "")

    def test_sample_requires_substrings(self):
        with pytest.raises(CorpusError, match="George"):
            Sample("no such name here", (RelationTriplet("George", "here", "x"),))

    def test_sample_rejects_duplicate_triplets(self):
        t = RelationTriplet("a", "b", "r")
        with pytest.raises(CorpusError, match="duplicate"):
            Sample("a b", (t, RelationTriplet("a", "b", "r")))

    def test_dataset_labels_are_exact_union(self):
        data = make_dataset(
            [("a b", [("a", "b", "r1")]), ("c d", [("c", "d", "r2"), ("c", "d", "r1")])]
        )
        assert data.labels == {"r1", "r2"}


class TestLoadJsonl:
    def test_single_line_example(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(FIG_LINE) + "\n", encoding="utf-8")
        data = load_jsonl(path)
        assert len(data) == 1
        assert data.labels == {"Military Rank"}
        assert data.samples[0].triplets[0].head == "Nicolas Tindal"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        data = load_jsonl(path)
        assert len(data) == 0
        assert data.labels == frozenset()

    def test_bad_json_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(FIG_LINE) + "\n{broken\n", encoding="utf-8")
        with pytest.raises(CorpusError, match=":2"):
            load_jsonl(path)

    def test_entity_not_substring_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        row = {"sentence": "nothing here", "triplets": [{"head": "George", "tail": "here", "label": "x"}]}
        path.write_text(json.dumps(row) + "\n", encoding="utf-8")
        with pytest.raises(CorpusError, match=":1"):
            load_jsonl(path)

    def test_round_trip(self, tmp_path):
        data = toy_eight_labels()
        path = write_jsonl(data, tmp_path / "rt.jsonl")
        assert load_jsonl(path) == data


class TestSplitZeroShot:
    def test_label_sets_disjoint_and_sized(self):
        fold = split_zero_shot(toy_eight_labels(), m=3, v=2, seed=0)
        assert len(fold.unseen_labels) == 3
        assert len(fold.validation_labels) == 2
        assert fold.test.labels == fold.unseen_labels
        assert fold.validation.labels <= fold.validation_labels
        assert len(fold.train.labels) <= 3
        assert not fold.train.labels & fold.validation.labels
        assert not fold.train.labels & fold.test.labels
        assert not fold.validation.labels & fold.test.labels

    def test_deterministic(self):
        data = toy_eight_labels()
        a = split_zero_shot(data, m=3, v=2, seed=0)
        b = split_zero_shot(data, m=3, v=2, seed=0)
        assert a == b
        c = split_zero_shot(data, m=3, v=2, seed=1)
        assert c.unseen_labels != a.unseen_labels or c != a

    def test_partition_covers_every_sample(self):
        data = toy_eight_labels()
        fold = split_zero_shot(data, m=3, v=2, seed=7)
        sentences = [s.sentence for s in data]
        split_sentences = [
            s.sentence for part in (fold.train, fold.validation, fold.test) for s in part
        ]
        assert sorted(split_sentences) == sorted(sentences)

    def test_fewrel_scale_label_arithmetic(self):
        # 80 labels, 10 unseen, 5 validation leaves 65 trainable labels.
        rows = [(f"h{i} x{i}", [(f"h{i}", f"x{i}", f"rel{i}")]) for i in range(80)]
        fold = split_zero_shot(make_dataset(rows), m=10, v=5, seed=0)
        assert len(fold.seen_labels - fold.validation_labels) == 65

    def test_configuration_errors(self):
        data = toy_eight_labels()
        with pytest.raises(CorpusError):
            split_zero_shot(data, m=6, v=2, seed=0)
        with pytest.raises(CorpusError):
            split_zero_shot(data, m=0, v=2, seed=0)

    def test_straddling_sentence_goes_to_test_with_filtered_gold(self):
        rows = [
            ("a b both", [("a", "b", "keep"), ("a", "both", "drop")]),
            ("c d", [("c", "d", "drop")]),
            ("e f", [("e", "f", "other")]),
            ("g h", [("g", "h", "fourth")]),
        ]
        data = make_dataset(rows)
        for seed in range(20):
            fold = split_zero_shot(data, m=1, v=1, seed=seed)
            if "keep" in fold.unseen_labels:
                test_sentences = [s.sentence for s in fold.test]
                assert "a b both" in test_sentences
                sample = next(s for s in fold.test if s.sentence == "a b both")
                assert {t.label for t in sample.triplets} == {"keep"}
                break
        else:
            pytest.fail("no seed selected the straddling label")


class TestStats:
    def test_single_sample_hand_counts(self):
        data = make_dataset(
            [("Nicolas Tindal was promoted to Captain.", [("Nicolas Tindal", "Captain", "Military Rank")])]
        )
        stats = dataset_stats(data)
        assert stats == {
            "samples": 1,
            "entities": 2,
            "relations": 1,
            "sentence_length": 6.0,
        }

    def test_empty_dataset_all_zero(self):
        stats = dataset_stats(Dataset(()))
        assert stats == {"samples": 0, "entities": 0, "relations": 0, "sentence_length": 0.0}

    def test_diversity_hand_counts(self):
        data = make_dataset([("a a b", [("a", "b", "r")])])
        assert diversity_stats(data) == {
            "samples": 1,
            "unique_entities": 2,
            "unique_words": 2,
        }

    def test_diversity_unchanged_by_duplicates(self):
        base = [("a a b", [("a", "b", "r")])]
        once = diversity_stats(make_dataset(base))
        twice = diversity_stats(make_dataset(base * 2))
        assert twice["unique_entities"] == once["unique_entities"]
        assert twice["unique_words"] == once["unique_words"]
        assert twice["samples"] == 2

    def test_diversity_case_folds_words_not_entities(self):
        data = make_dataset([("Word word X", [("Word", "X", "r")]), ("word X y", [("word", "X", "r")])])
        stats = diversity_stats(data)
        assert stats["unique_words"] == 3  # word, x, y
        assert stats["unique_entities"] == 3  # Word, word, X


class TestFoldManifest:
    def test_save_and_load_round_trip(self, tmp_path):
        fold = split_zero_shot(toy_eight_labels(), m=3, v=2, seed=1)
        manifest = save_fold(fold, tmp_path / "fold1")
        loaded = load_fold(manifest)
        assert loaded.seed == fold.seed
        assert loaded.unseen_labels == fold.unseen_labels
        assert loaded.validation_labels == fold.validation_labels
        assert loaded.train == fold.train
        assert loaded.validation == fold.validation
        assert loaded.test == fold.test

    def test_manifest_schema(self, tmp_path):
        fold = split_zero_shot(toy_eight_labels(), m=3, v=2, seed=2)
        manifest = json.loads(save_fold(fold, tmp_path / "f").read_text())
        assert set(manifest) == {"seed", "unseen_labels", "validation_labels", "train", "validation", "test"}
        assert manifest["seed"] == 2
