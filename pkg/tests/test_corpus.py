"""Tests for dataset loading, corpus variants, splitting and coverage."""

import json
from collections import Counter

import pytest

from kex.corpus import (
    SECTION_ORDER,
    VARIANT_CODES,
    CorpusVariant,
    DatasetError,
    Document,
    assemble_variant,
    custom_variant,
    keyphrase_coverage,
    load_dataset,
    save_dataset,
    split_dataset,
    variant,
)
from kex.metrics import normalize_phrase


def make_doc(doc_id="d1", **overrides):
    base = dict(
        id=doc_id,
        title="Adaptive graph ranking",
        abstract="We study adaptive graph ranking for document collections.",
        introduction="",
        conclusion="",
        first_sentences=(),
        last_sentences=(),
        reference_titles=(),
        full_text="",
        gold_keyphrases=("graph ranking",),
    )
    base.update(overrides)
    return Document(**base)


def make_record(doc_id="d1", **overrides):
    rec = {
        "id": doc_id,
        "title": "Adaptive graph ranking",
        "abstract": "We study adaptive graph ranking.",
        "introduction": "",
        "conclusion": "",
        "first_sentences": [],
        "last_sentences": [],
        "reference_titles": [],
        "full_text": "",
        "keyphrases": ["graph ranking"],
    }
    rec.update(overrides)
    return rec


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


class TestLoadDataset:
    def test_roundtrip_through_save(self, tmp_path):
        docs = [
            make_doc("a", reference_titles=("One title", "Another"), full_text="Body text."),
            make_doc("b", first_sentences=("First one.",), last_sentences=("Last one.",)),
        ]
        path = tmp_path / "data.jsonl"
        save_dataset(docs, path)
        assert load_dataset(path) == docs

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(
            "\n" + json.dumps(make_record()) + "\n\n" + json.dumps(make_record("d2")) + "\n",
            encoding="utf-8",
        )
        assert [d.id for d in load_dataset(path)] == ["d1", "d2"]

    def test_missing_field_names_field_and_line(self, tmp_path):
        rec = make_record()
        del rec["title"]
        path = write_jsonl(tmp_path / "d.jsonl", [rec])
        with pytest.raises(DatasetError, match=r"missing field title at line 1"):
            load_dataset(path)

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(make_record()) + "\n{not json\n", encoding="utf-8")
        with pytest.raises(DatasetError, match=r"line 2: invalid JSON"):
            load_dataset(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [make_record("x"), make_record("x")])
        with pytest.raises(DatasetError, match=r"duplicate id 'x' at line 2"):
            load_dataset(path)

    def test_empty_keyphrases_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [make_record(keyphrases=[])])
        with pytest.raises(DatasetError, match=r"has no keyphrases"):
            load_dataset(path)

    def test_unknown_field_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [make_record(extra=1)])
        with pytest.raises(DatasetError, match=r"unknown fields \['extra'\]"):
            load_dataset(path)

    def test_wrong_types_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [make_record(title=3)])
        with pytest.raises(DatasetError, match=r"field title must be a string"):
            load_dataset(path)
        path = write_jsonl(tmp_path / "e.jsonl", [make_record(reference_titles="not a list")])
        with pytest.raises(DatasetError, match=r"field reference_titles must be a list of strings"):
            load_dataset(path)

    def test_non_object_line_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("[1, 2]\n", encoding="utf-8")
        with pytest.raises(DatasetError, match=r"line 1: expected a JSON object"):
            load_dataset(path)

    def test_empty_id_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [make_record(id="")])
        with pytest.raises(DatasetError, match=r"line 1: empty id"):
            load_dataset(path)

    def test_unsupported_format(self, tmp_path):
        with pytest.raises(DatasetError, match=r"unsupported dataset format 'xml'"):
            load_dataset(tmp_path / "d.xml", format="xml")

    def test_bundled_fixture_is_valid(self, dataset):
        assert len(dataset) == 20
        assert len({d.id for d in dataset}) == 20
        assert all(d.gold_keyphrases for d in dataset)
        assert all(d.reference_titles for d in dataset)


class TestVariants:
    def test_canonical_codes_and_order(self):
        assert VARIANT_CODES == (
            "TA",
            "TAI",
            "TAC",
            "TAFp",
            "TALp",
            "TAR",
            "TAF",
            "TAFR",
            "TAICFpLp",
            "TAICFpLpR",
        )

    @pytest.mark.parametrize(
        "code,sections",
        [
            ("TA", ("T", "A")),
            ("TAR", ("T", "A", "R")),
            ("TAF", ("T", "A", "F")),
            ("TAFR", ("T", "A", "R", "F")),
            ("TAICFpLpR", ("T", "A", "I", "C", "Fp", "Lp", "R")),
        ],
    )
    def test_sections(self, code, sections):
        v = variant(code)
        assert v.sections == sections
        assert v.canonical

    def test_sections_follow_assembly_order(self):
        for code in VARIANT_CODES:
            secs = variant(code).sections
            order = [SECTION_ORDER.index(s) for s in secs]
            assert order == sorted(order), code

    def test_unknown_code_lists_known(self):
        with pytest.raises(ValueError, match=r"unknown corpus variant 'XY'.*TAICFpLpR"):
            variant("XY")

    def test_custom_variant_reorders_and_validates(self):
        v = custom_variant("mine", ["R", "A", "T"])
        assert v.sections == ("T", "A", "R")
        assert not v.canonical
        with pytest.raises(ValueError, match="unknown section codes"):
            custom_variant("bad", ["T", "A", "Z"])
        with pytest.raises(ValueError, match="must include sections T and A"):
            custom_variant("bad", ["T", "R"])


class TestAssemble:
    def test_join_and_order(self):
        doc = make_doc(
            title="T1",
            abstract="A1",
            reference_titles=("R1", "R2"),
            full_text="F1",
        )
        assert assemble_variant(doc, "TA") == "T1. A1"
        assert assemble_variant(doc, "TAR") == "T1. A1. R1. R2"
        assert assemble_variant(doc, "TAFR") == "T1. A1. R1. R2. F1"

    def test_empty_sections_add_no_separator(self):
        doc = make_doc(title="T1", abstract="A1", introduction="")
        assert assemble_variant(doc, "TAI") == assemble_variant(doc, "TA")

    def test_list_sections_one_piece_per_element(self):
        doc = make_doc(first_sentences=("S1.", "", "S2."))
        assert assemble_variant(doc, "TAFp").endswith("S1.. S2.")

    def test_accepts_variant_object(self):
        doc = make_doc(title="T1", abstract="A1")
        assert assemble_variant(doc, variant("TA")) == "T1. A1"


class TestSplit:
    def test_sizes(self):
        for n, n_train, n_test in [(2000, 1600, 400), (244, 195, 49), (20, 16, 4), (5, 4, 1)]:
            docs = [make_doc(f"d{i}") for i in range(n)]
            split = split_dataset(docs, seed=42)
            assert len(split.train_ids) == n_train
            assert len(split.test_ids) == n_test

    def test_partition(self):
        docs = [make_doc(f"d{i}") for i in range(37)]
        split = split_dataset(docs, seed=7)
        assert set(split.train_ids) | set(split.test_ids) == {d.id for d in docs}
        assert not set(split.train_ids) & set(split.test_ids)

    def test_deterministic(self):
        docs = [make_doc(f"d{i}") for i in range(20)]
        assert split_dataset(docs, seed=42) == split_dataset(docs, seed=42)
        assert split_dataset(docs, seed=42) != split_dataset(docs, seed=43)

    def test_too_small(self):
        with pytest.raises(ValueError, match="dataset too small"):
            split_dataset([make_doc(f"d{i}") for i in range(4)], seed=1)

    def test_fixture_split_is_stable(self, dataset_split):
        assert dataset_split.seed == 42
        assert len(dataset_split.train_ids) == 16
        assert len(dataset_split.test_ids) == 4


class TestCoverage:
    def test_hand_example_half_covered(self, config):
        # 4 gold phrases, 2 findable in title+abstract.
        docs = [
            make_doc(
                "c1",
                title="Graph ranking",
                abstract="A study of node weights.",
                reference_titles=("Phrase mining in text",),
                gold_keyphrases=("graph ranking", "node weight", "phrase mining", "missing idea"),
            )
        ]
        report = keyphrase_coverage(docs, [("T", "A")], config)
        assert report.total_gold == 4
        assert report.covered["T+A"] == 2
        assert report.coverage["T+A"] == pytest.approx(0.5)

    def test_reference_only_statistic(self, config):
        docs = [
            make_doc(
                "c1",
                title="Graph ranking",
                abstract="Nothing else here.",
                reference_titles=("Phrase mining in text",),
                gold_keyphrases=("graph ranking", "phrase mining"),
            )
        ]
        report = keyphrase_coverage(docs, [("T", "A")], config)
        assert report.reference_only_covered == 1
        assert report.reference_only_coverage == pytest.approx(0.5)

    def test_monotone_in_sections(self, dataset, config):
        report = keyphrase_coverage(dataset, [("T", "A"), ("T", "A", "R")], config)
        assert report.coverage["T+A+R"] >= report.coverage["T+A"]

    def test_deduplicates_gold_per_document(self, config):
        # "Tools" and "tool" normalize to the same lemma tuple.
        docs = [make_doc("c1", title="Tools", gold_keyphrases=("Tools", "tool"))]
        report = keyphrase_coverage(docs, [("T", "A")], config)
        assert report.total_gold == 1

    def test_length_distribution_matches_brute_force(self, dataset, config):
        report = keyphrase_coverage(dataset, [("T", "A")], config)
        expected = Counter()
        for doc in dataset:
            gold = {normalize_phrase(g, config) for g in doc.gold_keyphrases}
            gold.discard(())
            for g in gold:
                expected[len(g)] += 1
        assert {k: v for k, (v, _) in report.length_distribution.items()} == dict(expected)
        assert sum(f for _, f in report.length_distribution.values()) == pytest.approx(1.0)

    def test_rejects_bad_input(self, config):
        with pytest.raises(ValueError, match="at least one document"):
            keyphrase_coverage([], [("T", "A")], config)
        with pytest.raises(ValueError, match="unknown section codes"):
            keyphrase_coverage([make_doc()], [("T", "Z")], config)
        junk = make_doc(gold_keyphrases=("***",))
        with pytest.raises(ValueError, match="no usable gold keyphrases"):
            keyphrase_coverage([junk], [("T", "A")], config)

    def test_to_tsv_shape(self, config):
        report = keyphrase_coverage([make_doc()], [("T", "A"), ("R",)], config)
        lines = report.to_tsv().splitlines()
        assert lines[0] == "sections\tcovered\ttotal\tfraction"
        assert len(lines) == 3
        assert lines[1].startswith("T+A\t")

    def test_fixture_coverage_profile(self, dataset, config):
        report = keyphrase_coverage(dataset, [("T", "A"), ("T", "A", "R")], config)
        assert report.n_docs == 20
        assert report.total_gold == 80
        assert report.avg_gold_per_doc == pytest.approx(4.0)
        assert report.coverage["T+A"] == pytest.approx(0.5)
        assert report.coverage["T+A+R"] == pytest.approx(1.0)
        assert report.reference_only_coverage == pytest.approx(0.5)
        assert report.length_distribution == {
            1: (20, 0.25),
            2: (55, 0.6875),
            3: (5, 0.0625),
        }
