import json
import math
import random
import shutil
import string

import numpy as np
import pytest

from sdatlas.catalog import (
    EMBED_DIM,
    BadLimit,
    Catalog,
    CatalogDocument,
    CorruptSnapshot,
    EmptyQuery,
    InvalidDocument,
    SDG_TITLES,
    SdgLabel,
    SearchQuery,
    VersionMismatch,
    classify_sdg,
    cosine,
    document_from_json,
    document_to_json,
    embed,
)
from sdatlas.graph import derive_causal_graph, enumerate_loops
from sdatlas.structured import to_structured


def make_doc(doc_id, title, abstract="", **kw):
    return CatalogDocument(id=doc_id, title=title, abstract=abstract, **kw)


@pytest.fixture
def small_catalog():
    cat = Catalog()
    cat.index_document(
        make_doc(
            "d1",
            "Malaria transmission dynamics",
            "Vector-borne disease spread and community health interventions.",
            year=2022,
            sdg_labels=(SdgLabel(goal=3, confidence=0.2),),
            topics=("health",),
        )
    )
    cat.index_document(
        make_doc(
            "d2",
            "Urban traffic congestion",
            "Road capacity, commuting patterns, and travel demand.",
            year=2019,
            topics=("transport",),
        )
    )
    cat.index_document(
        make_doc(
            "d3",
            "Renewable energy transition",
            "Solar adoption and grid investment feedbacks.",
            year=2021,
            sdg_labels=(SdgLabel(goal=7, confidence=0.3),),
            topics=("energy",),
        )
    )
    return cat


class TestEmbed:
    def test_deterministic(self):
        a = embed("malaria transmission dynamics")
        b = embed("malaria transmission dynamics")
        assert np.array_equal(a, b)

    def test_unit_norm_or_zero(self):
        assert math.isclose(float(np.linalg.norm(embed("population growth"))), 1.0, abs_tol=1e-9)
        assert float(np.linalg.norm(embed(""))) == 0.0
        # stopword-only text also maps to the zero vector
        assert float(np.linalg.norm(embed("the of and"))) == 0.0

    def test_shape_and_dtype(self):
        v = embed("anything at all")
        assert v.shape == (EMBED_DIM,)
        assert v.dtype == np.float64

    def test_shared_terms_beat_disjoint_terms(self):
        q = embed("malaria transmission")
        near = embed("malaria transmission dynamics")
        far = embed("urban traffic congestion")
        assert cosine(q, near) > cosine(q, far)

    def test_no_bucket_collisions_among_comparison_tokens(self):
        # The unigrams behind the ordering assertion above must not share a
        # bucket, otherwise that comparison would be testing hash noise.
        from sdatlas.catalog import _hash64

        tokens = ["malaria", "transmission", "dynamics", "urban", "traffic", "congestion"]
        buckets = {}
        for token in tokens:
            key = _hash64(token) % EMBED_DIM
            assert buckets.setdefault(key, token) == token, (token, buckets[key])

    def test_case_insensitive(self):
        assert np.array_equal(embed("Malaria Dynamics"), embed("malaria dynamics"))


class TestCosine:
    def test_zero_vector_safe(self):
        assert cosine(np.zeros(EMBED_DIM), embed("water")) == 0.0

    def test_self_similarity(self):
        v = embed("fisheries collapse")
        assert math.isclose(cosine(v, v), 1.0, abs_tol=1e-9)


class TestClassifySdg:
    def test_health_text(self):
        labels = classify_sdg("A model of malaria transmission and community health outcomes")
        assert any(l.goal == 3 for l in labels)

    def test_energy_text(self):
        labels = classify_sdg("renewable energy adoption under solar power subsidies")
        assert any(l.goal == 7 for l in labels)

    def test_unrelated_text(self):
        assert classify_sdg("abstract algebra lecture notes") == []

    def test_word_boundaries(self):
        # "health" should not fire on "healthy" unless the lexicon has it
        labels_sub = classify_sdg("unhealthy")
        assert all(l.goal != 3 or l.confidence == 0 for l in labels_sub) or labels_sub == []

    def test_confidence_bounds_and_order(self):
        labels = classify_sdg(
            "poverty, hunger, health, education, gender equality, clean water, "
            "renewable energy, economic growth, industry, inequality, cities, "
            "consumption, climate change, oceans, forests, justice, partnerships"
        )
        goals = [l.goal for l in labels]
        assert goals == sorted(goals)
        assert all(0.0 < l.confidence <= 1.0 for l in labels)

    def test_titles_cover_all_goals(self):
        assert sorted(SDG_TITLES) == list(range(1, 18))


class TestSdgLabel:
    def test_goal_range(self):
        with pytest.raises(ValueError):
            SdgLabel(goal=0)
        with pytest.raises(ValueError):
            SdgLabel(goal=18)

    def test_target_must_match_goal(self):
        SdgLabel(goal=3, target="3.3")
        with pytest.raises(ValueError):
            SdgLabel(goal=3, target="7.2")

    def test_confidence_range(self):
        with pytest.raises(ValueError):
            SdgLabel(goal=1, confidence=1.5)


class TestDocumentValidation:
    def test_empty_id(self):
        with pytest.raises(InvalidDocument):
            make_doc("", "title").validate()

    def test_cld_requires_diagram(self):
        with pytest.raises(InvalidDocument):
            make_doc("x", "t", has_cld=True).validate()

    def test_sfd_requires_stock(self, population_model):
        make_doc("x", "t", model=population_model, has_sfd=True).validate()
        with pytest.raises(InvalidDocument):
            make_doc("x", "t", has_sfd=True).validate()

    def test_loop_count_consistency(self, population_model):
        g = derive_causal_graph(population_model)
        d = to_structured(g, enumerate_loops(g))
        make_doc("x", "t", diagram=d, has_cld=True, loop_count=2).validate()
        with pytest.raises(InvalidDocument):
            make_doc("x", "t", diagram=d, has_cld=True, loop_count=5).validate()

    def test_json_round_trip(self, population_model):
        g = derive_causal_graph(population_model)
        d = to_structured(g, enumerate_loops(g))
        doc = make_doc(
            "rt",
            "Round trip",
            "abstract text",
            authors=("A. Author",),
            year=2020,
            doi="10.1/x",
            model=population_model,
            diagram=d,
            sdg_labels=(SdgLabel(goal=3, target="3.3", confidence=0.4),),
            topics=("health",),
            has_cld=True,
            has_sfd=True,
            loop_count=2,
        )
        again = document_from_json(json.loads(json.dumps(document_to_json(doc))))
        assert again.id == doc.id
        assert again.diagram == doc.diagram
        assert again.sdg_labels == doc.sdg_labels
        assert again.model is not None
        from sdatlas.xmile import models_equal

        assert models_equal(again.model, doc.model)


class TestSearch:
    def test_text_relevance(self, small_catalog):
        results = small_catalog.search(SearchQuery(text="malaria transmission"))
        assert results[0].id == "d1"
        assert results[0].score > results[-1].score

    def test_matched_fields(self, small_catalog):
        results = small_catalog.search(SearchQuery(text="malaria"))
        assert "title" in results[0].matched_fields

    def test_sdg_filter(self, small_catalog):
        results = small_catalog.search(SearchQuery(sdg=7))
        assert [r.id for r in results] == ["d3"]

    def test_topic_filter(self, small_catalog):
        results = small_catalog.search(SearchQuery(topic="transport"))
        assert [r.id for r in results] == ["d2"]

    def test_filter_only_sorts_by_year_desc(self):
        cat = Catalog()
        cat.index_document(make_doc("a", "One", year=2001, topics=("t",)))
        cat.index_document(make_doc("b", "Two", year=2010, topics=("t",)))
        cat.index_document(make_doc("c", "Three", year=None, topics=("t",)))
        assert [r.id for r in cat.search(SearchQuery(topic="t"))] == ["b", "a", "c"]

    def test_empty_query_rejected(self, small_catalog):
        with pytest.raises(EmptyQuery):
            small_catalog.search(SearchQuery())

    def test_bad_limit_rejected(self, small_catalog):
        with pytest.raises(BadLimit):
            small_catalog.search(SearchQuery(text="x", limit=0))
        with pytest.raises(BadLimit):
            small_catalog.search(SearchQuery(text="x", limit=101))

    def test_limit_honored(self, small_catalog):
        assert len(small_catalog.search(SearchQuery(text="and", limit=1))) == 1

    def test_reindex_replaces(self, small_catalog):
        small_catalog.index_document(make_doc("d2", "Completely new title about fisheries"))
        assert len(small_catalog) == 3
        assert small_catalog.get("d2").title.startswith("Completely")

    def test_deterministic_and_complete(self, small_catalog):
        a = small_catalog.search(SearchQuery(text="energy transition"))
        b = small_catalog.search(SearchQuery(text="energy transition"))
        assert a == b
        # every indexed doc appears when the limit allows
        assert {r.id for r in small_catalog.search(SearchQuery(text="energy", limit=100))} == {
            "d1",
            "d2",
            "d3",
        }

    def test_tie_break_by_id(self):
        cat = Catalog()
        cat.index_document(make_doc("b", "same words here"))
        cat.index_document(make_doc("a", "same words here"))
        results = cat.search(SearchQuery(text="same words"))
        assert [r.id for r in results] == ["a", "b"]
        assert results[0].score == results[1].score

    def test_search_properties_random_corpora(self):
        rng = random.Random(42)
        words = ["water", "energy", "health", "forest", "traffic", "market",
                 "policy", "growth", "carbon", "yield", "risk", "supply"]
        for trial in range(20):
            cat = Catalog()
            n = rng.randint(1, 40)
            for i in range(n):
                title = " ".join(rng.choices(words, k=rng.randint(1, 5)))
                cat.index_document(make_doc(f"doc{i:03d}", title, year=rng.randint(1990, 2024)))
            q = SearchQuery(text=rng.choice(words), limit=100)
            results = cat.search(q)
            scores = [r.score for r in results]
            assert scores == sorted(scores, reverse=True), trial
            assert len(results) == n
            assert len({r.id for r in results}) == n
            assert cat.search(q) == results


class TestSnapshots:
    def test_round_trip_bit_stable_scores(self, small_catalog, tmp_path):
        snap = tmp_path / "snap"
        small_catalog.save_snapshot(snap)
        loaded = Catalog.load_snapshot(snap)
        for text in ("malaria transmission", "traffic", "solar grid"):
            before = small_catalog.search(SearchQuery(text=text))
            after = loaded.search(SearchQuery(text=text))
            assert before == after  # exact float equality

    def test_manifest_contents(self, small_catalog, tmp_path):
        snap = tmp_path / "snap"
        small_catalog.save_snapshot(snap)
        manifest = json.loads((snap / "manifest.json").read_text())
        assert manifest["format_version"] == 1
        assert manifest["document_count"] == 3
        assert set(manifest["checksums"]) == {"documents.jsonl", "docids.txt", "vectors.bin"}
        assert (snap / "vectors.bin").stat().st_size == 3 * EMBED_DIM * 4

    def test_save_deterministic(self, small_catalog, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        small_catalog.save_snapshot(a)
        small_catalog.save_snapshot(b)
        for name in ("manifest.json", "documents.jsonl", "docids.txt", "vectors.bin"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_corrupt_checksum(self, small_catalog, tmp_path):
        snap = tmp_path / "snap"
        small_catalog.save_snapshot(snap)
        blob = (snap / "documents.jsonl").read_bytes()
        (snap / "documents.jsonl").write_bytes(blob[:-2] + b"!\n")
        with pytest.raises(CorruptSnapshot):
            Catalog.load_snapshot(snap)

    def test_truncated_vectors(self, small_catalog, tmp_path):
        snap = tmp_path / "snap"
        small_catalog.save_snapshot(snap)
        vec = (snap / "vectors.bin").read_bytes()[: EMBED_DIM * 4]
        (snap / "vectors.bin").write_bytes(vec)
        manifest = json.loads((snap / "manifest.json").read_text())
        import hashlib

        manifest["checksums"]["vectors.bin"] = hashlib.sha256(vec).hexdigest()
        (snap / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(CorruptSnapshot):
            Catalog.load_snapshot(snap)

    def test_version_mismatch(self, small_catalog, tmp_path):
        snap = tmp_path / "snap"
        small_catalog.save_snapshot(snap)
        manifest = json.loads((snap / "manifest.json").read_text())
        manifest["format_version"] = 99
        (snap / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(VersionMismatch):
            Catalog.load_snapshot(snap)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(CorruptSnapshot):
            Catalog.load_snapshot(tmp_path / "nope")

    def test_missing_file(self, small_catalog, tmp_path):
        snap = tmp_path / "snap"
        small_catalog.save_snapshot(snap)
        (snap / "docids.txt").unlink()
        with pytest.raises(CorruptSnapshot):
            Catalog.load_snapshot(snap)

    def test_empty_catalog_round_trips(self, tmp_path):
        snap = tmp_path / "empty"
        Catalog().save_snapshot(snap)
        assert len(Catalog.load_snapshot(snap)) == 0
