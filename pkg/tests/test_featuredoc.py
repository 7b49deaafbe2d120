import json
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import reference
from fabric.compiler import compile_to_bytes
from fabric.corpus import Corpus
from fabric.featuredoc import TRUNCATE_AT, feature_frequency, render_docs
from fabric.model import EDGE_KIND, Edge, FeatureAssignment
from fabric.synth import random_corpus, toy4


def load(logical):
    return Corpus.from_bytes(compile_to_bytes(logical)[0])


class TestGoldenTables:
    def test_pinned_frequencies(self, toy4_corpus, golden):
        want = golden("toy4_featuredoc.json")
        for otype, key, field in (
            ("phrase", "typ", "phrase_typ"),
            ("word", "lex", "word_lex"),
            ("word", "text", "word_text"),
        ):
            table = feature_frequency(toy4_corpus, otype, key)
            assert [[v, c] for v, c in table.entries] == want[field]
            assert table.total == sum(c for _v, c in table.entries)

    def test_pinned_file_set(self, tmp_path, toy4_corpus, golden):
        want = golden("toy4_featuredoc.json")
        written = render_docs(toy4_corpus, tmp_path)
        assert sorted(written) == want["doc_files"]
        assert sorted(p.name for p in tmp_path.iterdir()) == want["doc_files"]
        index = json.loads((tmp_path / "index.json").read_text(encoding="utf-8"))
        assert len(index["tables"]) == want["table_count"]

    def test_index_document(self, tmp_path, toy4_corpus):
        render_docs(toy4_corpus, tmp_path)
        index = json.loads((tmp_path / "index.json").read_text(encoding="utf-8"))
        assert index["corpus_fingerprint"] == toy4_corpus.fingerprint
        assert index["stats"]["features"] == 10
        totals = {(r["otype"], r["key"]): r["total"] for r in index["tables"]}
        assert totals == {("phrase", "typ"): 2, ("word", "lex"): 4, ("word", "text"): 4}


class TestOrdering:
    def test_count_desc_then_value_asc(self, toy4_logical):
        skewed = replace(
            toy4_logical,
            features=toy4_logical.features
            + (
                FeatureAssignment("N", 201, "typ", "NP"),
                FeatureAssignment("N", 301, "typ", "AA"),
            ),
        )
        # typ values: phrase NP, phrase VP, clause NP, verse AA
        table = feature_frequency(load(skewed), "phrase", "typ")
        assert table.entries == (("NP", 1), ("VP", 1))
        all_typ = [
            feature_frequency(load(skewed), t, "typ").entries
            for t in ("clause", "verse")
        ]
        assert all_typ == [(("NP", 1),), (("AA", 1),)]

    @settings(max_examples=15, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_matches_reference_counter(self, seed):
        logical = random_corpus(random.Random(seed))
        corpus = load(logical)
        by_id = {n.id: n for n in logical.nodes}
        for key in corpus.feature_keys():
            values_by_otype: dict[str, list[str]] = {}
            for f in logical.features:
                if f.kind == "N" and f.key == key:
                    values_by_otype.setdefault(by_id[f.target].otype, []).append(f.value)
            for otype, values in values_by_otype.items():
                table = feature_frequency(corpus, otype, key)
                assert list(table.entries) == reference.frequency(values)
                assert table.total == len(values)


class TestEdgeTables:
    def corpus(self):
        base = toy4()
        return load(
            replace(
                base,
                edges=(Edge(1, 4, 3, "dep"), Edge(2, 4, 1, "dep"), Edge(3, 101, 102, "link")),
                features=base.features
                + (
                    FeatureAssignment(EDGE_KIND, 1, "role", "subj"),
                    FeatureAssignment(EDGE_KIND, 2, "role", "subj"),
                    FeatureAssignment(EDGE_KIND, 3, "role", "link"),
                ),
            )
        )

    def test_edge_frequency_is_per_label(self):
        corpus = self.corpus()
        dep = feature_frequency(corpus, "dep", "role", EDGE_KIND)
        assert dep.entries == (("subj", 2),)
        link = feature_frequency(corpus, "link", "role", EDGE_KIND)
        assert link.entries == (("link", 1),)

    def test_edge_docs_are_written(self, tmp_path):
        written = render_docs(self.corpus(), tmp_path)
        assert "edge-dep.role.txt" in written
        assert "edge-link.role.json" in written

    def test_unknown_edge_label(self):
        with pytest.raises(KeyError):
            feature_frequency(self.corpus(), "nope", "role", EDGE_KIND)


class TestErrors:
    def test_unknown_key(self, toy4_corpus):
        with pytest.raises(KeyError):
            feature_frequency(toy4_corpus, "word", "nope")

    def test_unknown_otype(self, toy4_corpus):
        with pytest.raises(KeyError):
            feature_frequency(toy4_corpus, "nope", "text")

    def test_key_on_wrong_otype_is_empty(self, toy4_corpus):
        table = feature_frequency(toy4_corpus, "verse", "lex")
        assert table.total == 0 and table.entries == ()


class TestRendering:
    def long_value_corpus(self):
        base = toy4()
        long_value = "x" * 150
        features = tuple(
            f if not (f.target == 101 and f.key == "typ") else replace(f, value=long_value)
            for f in base.features
        )
        return load(replace(base, features=features)), long_value

    def test_txt_truncates_long_values(self, tmp_path):
        corpus, long_value = self.long_value_corpus()
        render_docs(corpus, tmp_path)
        txt = (tmp_path / "phrase.typ.txt").read_text(encoding="utf-8")
        assert long_value not in txt
        truncated = long_value[: TRUNCATE_AT - 1] + "…"
        assert truncated in txt

    def test_json_keeps_full_values(self, tmp_path):
        corpus, long_value = self.long_value_corpus()
        render_docs(corpus, tmp_path)
        doc = json.loads((tmp_path / "phrase.typ.json").read_text(encoding="utf-8"))
        assert {"value": long_value, "count": 1} in doc["values"]

    def test_short_values_are_untouched(self, tmp_path, toy4_corpus):
        render_docs(toy4_corpus, tmp_path)
        txt = (tmp_path / "word.lex.txt").read_text(encoding="utf-8")
        assert "fox" in txt and "…" not in txt

    def test_regeneration_is_identical(self, tmp_path, toy4_corpus):
        first = tmp_path / "a"
        second = tmp_path / "b"
        render_docs(toy4_corpus, first)
        render_docs(toy4_corpus, second)
        for path in sorted(first.iterdir()):
            assert path.read_bytes() == (second / path.name).read_bytes()

    def test_totals_reconcile_with_stats(self, tmp_path, toy4_corpus):
        render_docs(toy4_corpus, tmp_path)
        index = json.loads((tmp_path / "index.json").read_text(encoding="utf-8"))
        assert sum(r["total"] for r in index["tables"]) == toy4_corpus.stats().features
