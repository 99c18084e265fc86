"""Tests for condyr.store module."""

from __future__ import annotations

import tempfile
from itertools import combinations
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condyr.constants import DICTIONARY_TABLE, METADATA_TABLE, QUAD_TABLE, VERSION_TABLE, VNG_TABLE
from condyr.exceptions import EmptySnapshotError, InvalidTermError, StoreFormatError
from condyr.models import QuadPatternKey, ScanCounters, Term, Vocabulary
from condyr.sample import ALICE, BOB, CAROL, G1, G2, KNOWS, LIKES, PIZZA, SAMPLE_STATS
from condyr.store import VersionedQuadStore, export_tables
from condyr.utils import validity_to_text
from tests.strategies import literals

BOUND_POSITIONS = ["".join(combo) for size in range(1, 5) for combo in combinations("gspo", size)]


def _validity(snapshot, s, p, o, g):
    lookup = snapshot.dictionary.lookup
    return snapshot.validities[(lookup(s), lookup(p), lookup(o), lookup(g))]


class TestIngest:
    def test_sample_statistics(self, sample_snapshot):
        stats = sample_snapshot.stats()
        assert (stats.version_count, stats.quad_count, stats.flat_row_count) == SAMPLE_STATS
        assert stats.vng_count == 5

    def test_sample_validities(self, sample_snapshot):
        assert validity_to_text(_validity(sample_snapshot, ALICE, KNOWS, BOB, G1), 3) == "111"
        assert validity_to_text(_validity(sample_snapshot, BOB, LIKES, PIZZA, G1), 3) == "011"
        assert validity_to_text(_validity(sample_snapshot, CAROL, KNOWS, ALICE, G2), 3) == "001"

    def test_returns_version_index(self):
        store = VersionedQuadStore()
        assert store.ingest_version([(ALICE, KNOWS, BOB, G1)]) == 1
        assert store.ingest_version([(ALICE, KNOWS, BOB, G1)]) == 2
        assert store.version_count == 2

    def test_duplicates_within_snapshot_collapse(self):
        store = VersionedQuadStore()
        store.ingest_version([(ALICE, KNOWS, BOB, G1), (ALICE, KNOWS, BOB, G1)])
        assert store.stats().quad_count == 1
        assert store.stats().flat_row_count == 1

    def test_empty_snapshot_rejected_by_default(self):
        store = VersionedQuadStore()
        with pytest.raises(EmptySnapshotError):
            store.ingest_version([])
        assert store.version_count == 0

    def test_empty_snapshot_allowed(self):
        store = VersionedQuadStore(allow_empty_snapshot=True)
        store.ingest_version([(ALICE, KNOWS, BOB, G1)])
        store.ingest_version([])
        snapshot = store.snapshot()
        assert snapshot.version_count == 2
        assert validity_to_text(_validity(snapshot, ALICE, KNOWS, BOB, G1), 2) == "10"
        assert len(snapshot.vngs) == 1

    def test_existing_validities_keep_their_bits(self):
        store = VersionedQuadStore()
        store.ingest_version([(ALICE, KNOWS, BOB, G1)])
        before = store.snapshot()
        store.ingest_version([(BOB, KNOWS, CAROL, G1)])
        after = store.snapshot()
        assert _validity(after, ALICE, KNOWS, BOB, G1) == 0b01
        assert _validity(after, BOB, KNOWS, CAROL, G1) == 0b10
        assert before.version_count == 1
        assert len(before.validities) == 1

    @pytest.mark.parametrize(
        "quad",
        [
            (ALICE, KNOWS, BOB, Term.literal("g")),
            (ALICE, Term.literal("p"), BOB, G1),
            (Term.literal("s"), KNOWS, BOB, G1),
        ],
    )
    def test_invalid_positions(self, quad):
        store = VersionedQuadStore()
        with pytest.raises(InvalidTermError):
            store.ingest_version([quad])
        assert store.version_count == 0

    def test_labels(self, sample_store):
        snapshot = sample_store.snapshot()
        assert [snapshot.version_label(i) for i in (1, 2, 3)] == ["v1", "v2", "v3"]
        sample_store.label_version(2, "release")
        assert sample_store.snapshot().version_label(2) == "release"
        sample_store.label_version(2, "")
        assert sample_store.snapshot().version_label(2) is None
        with pytest.raises(IndexError):
            sample_store.label_version(4, "x")


class TestVersionedNamedGraphs:
    def test_registration_order(self, sample_snapshot):
        lookup = sample_snapshot.dictionary.lookup
        registry = [(vng.graph_id, vng.version_index) for vng in sample_snapshot.vngs]
        assert registry == [(lookup(G1), 1), (lookup(G1), 2), (lookup(G2), 2), (lookup(G1), 3), (lookup(G2), 3)]
        for ordinal, vng in enumerate(sample_snapshot.vngs, start=1):
            assert sample_snapshot.dictionary.resolve(vng.vng_id) == Term.iri(f"urn:condyr:vng{ordinal}")

    def test_vng_id_lookup(self, sample_snapshot):
        g2 = sample_snapshot.dictionary.lookup(G2)
        assert sample_snapshot.dictionary.resolve(sample_snapshot.vng_id(g2, 2)) == Term.iri("urn:condyr:vng3")
        assert sample_snapshot.vng_id(g2, 1) is None

    def test_vng_for_graph(self, sample_snapshot, sample_store):
        lookup = sample_snapshot.dictionary.lookup
        assert [vng.version_index for vng in sample_snapshot.vng_for_graph(lookup(G1))] == [1, 2, 3]
        assert [vng.version_index for vng in sample_store.vng_for_graph(lookup(G2))] == [2, 3]
        assert sample_snapshot.vng_for_graph(lookup(ALICE)) == []

    def test_metadata_triples(self, sample_snapshot):
        dictionary = sample_snapshot.dictionary
        in_version = dictionary.lookup(Term.iri("v:in-version"))
        version_of = dictionary.lookup(Term.iri("v:version-of"))
        vng4 = dictionary.lookup(Term.iri("urn:condyr:vng4"))
        assert [dictionary.resolve(t.o) for t in sample_snapshot.metadata_matching(vng4, in_version)] == [
            Term.literal("3")
        ]
        assert [dictionary.resolve(t.o) for t in sample_snapshot.metadata_matching(vng4, version_of)] == [G1]
        assert len(sample_snapshot.metadata) == 10

    def test_custom_vocabulary(self):
        store = VersionedQuadStore(vocabulary=Vocabulary("ex:inv", "ex:of", "ex:vng/"))
        store.ingest_version([(ALICE, KNOWS, BOB, G1)])
        dictionary = store.dictionary
        assert Term.iri("ex:vng/1") in dictionary
        assert Term.iri("ex:inv") in dictionary
        assert Term.iri("v:in-version") not in dictionary

    def test_add_metadata_ignores_duplicates(self, sample_store):
        before = len(sample_store.snapshot().metadata)
        label = Term.iri("ex:label")
        sample_store.add_metadata(Term.iri("urn:condyr:vng1"), label, Term.literal("first"))
        sample_store.add_metadata(Term.iri("urn:condyr:vng1"), label, Term.literal("first"))
        assert len(sample_store.snapshot().metadata) == before + 1


class TestQuadsMatching:
    def test_bound_subject_and_graph(self, sample_snapshot):
        lookup = sample_snapshot.dictionary.lookup
        counters = ScanCounters()
        matches = list(sample_snapshot.quads_matching(QuadPatternKey(s=lookup(ALICE), g=lookup(G1)), counters))
        assert {sample_snapshot.dictionary.resolve(q.o) for q in matches} == {BOB, Term.literal("sushi")}
        assert counters.rows_scanned == len(matches)
        assert counters.index_probes == 1

    def test_unbound_graph_probes_each_graph(self, sample_snapshot):
        lookup = sample_snapshot.dictionary.lookup
        counters = ScanCounters()
        matches = list(sample_snapshot.quads_matching(QuadPatternKey(p=lookup(KNOWS)), counters))
        assert len(matches) == 3
        assert counters.rows_scanned == 3
        assert counters.index_probes == 2

    def test_full_scan(self, sample_snapshot):
        assert len(list(sample_snapshot.quads_matching(QuadPatternKey()))) == 5

    @pytest.mark.parametrize("positions", BOUND_POSITIONS)
    def test_every_bound_combination_agrees_with_filtering(self, sample_snapshot, positions):
        for quad in sample_snapshot.quads():
            key = QuadPatternKey(**{pos: getattr(quad, pos) for pos in positions})
            expected = [
                q for q in sample_snapshot.quads() if all(getattr(q, pos) == getattr(quad, pos) for pos in positions)
            ]
            assert sorted(sample_snapshot.quads_matching(key), key=lambda q: q.key) == expected


class TestArchive:
    def test_round_trip(self, sample_store, tmp_path):
        path = tmp_path / "sample.condyr"
        sample_store.save(path)
        loaded = VersionedQuadStore.load(path)
        original, restored = sample_store.snapshot(), loaded.snapshot()
        assert restored.stats() == original.stats()
        assert dict(restored.validities) == dict(original.validities)
        assert restored.vngs == original.vngs
        assert restored.metadata == original.metadata
        assert list(restored.dictionary.items()) == list(original.dictionary.items())
        assert restored.version_labels == original.version_labels

    @settings(max_examples=100, deadline=None)
    @given(st.lists(literals(), min_size=1, max_size=15, unique=True))
    def test_literals_survive_reload(self, objects):
        store = VersionedQuadStore()
        store.ingest_version([(ALICE, LIKES, term, G1) for term in objects])
        with tempfile.TemporaryDirectory() as workdir:
            path = Path(workdir) / "literals.condyr"
            store.save(path)
            loaded = VersionedQuadStore.load(path)
        dictionary = loaded.snapshot().dictionary
        for term in objects:
            term_id = dictionary.lookup(term)
            assert term_id is not None
            assert dictionary.resolve(term_id) == term
        assert dict(loaded.snapshot().validities) == dict(store.snapshot().validities)

    def test_save_is_deterministic(self, tmp_path):
        from condyr.sample import build_sample_store

        first, second = tmp_path / "a.condyr", tmp_path / "b.condyr"
        build_sample_store().save(first)
        build_sample_store().save(second)
        assert first.read_bytes() == second.read_bytes()

    def test_loaded_store_accepts_new_versions(self, sample_store, tmp_path):
        path = tmp_path / "sample.condyr"
        sample_store.save(path)
        loaded = VersionedQuadStore.load(path)
        loaded.ingest_version([(ALICE, KNOWS, BOB, G1)])
        snapshot = loaded.snapshot()
        assert validity_to_text(_validity(snapshot, ALICE, KNOWS, BOB, G1), 4) == "1111"
        assert snapshot.dictionary.resolve(snapshot.vngs[-1].vng_id) == Term.iri("urn:condyr:vng6")

    def test_truncated_archive(self, sample_store, tmp_path):
        path = tmp_path / "sample.condyr"
        sample_store.save(path)
        path.write_bytes(path.read_bytes()[:-40])
        with pytest.raises(StoreFormatError, match="truncated|checksum"):
            VersionedQuadStore.load(path)

    def test_corrupted_archive(self, sample_store, tmp_path):
        path = tmp_path / "sample.condyr"
        sample_store.save(path)
        payload = bytearray(path.read_bytes())
        payload[40] = ord("X") if payload[40] != ord("X") else ord("Y")
        path.write_bytes(bytes(payload))
        with pytest.raises(StoreFormatError, match="checksum mismatch"):
            VersionedQuadStore.load(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(StoreFormatError, match="Cannot read store"):
            VersionedQuadStore.load(tmp_path / "missing.condyr")

    def test_foreign_file(self, tmp_path):
        path = tmp_path / "notes.txt"
        path.write_text("hello\n")
        with pytest.raises(StoreFormatError):
            VersionedQuadStore.load(path)

    def test_special_characters_survive(self, tmp_path):
        store = VersionedQuadStore()
        tricky = Term.literal('tab\there "quoted"\nnew line \\ end', lang="en")
        store.ingest_version([(ALICE, LIKES, tricky, G1)], label="first\tlabel")
        path = tmp_path / "tricky.condyr"
        store.save(path)
        snapshot = VersionedQuadStore.load(path).snapshot()
        assert tricky in snapshot.dictionary
        assert snapshot.version_label(1) == "first\tlabel"


class TestExportTables:
    def test_tables_and_headers(self, sample_snapshot):
        tables = export_tables(sample_snapshot)
        assert set(tables) == {DICTIONARY_TABLE, VERSION_TABLE, VNG_TABLE, QUAD_TABLE, METADATA_TABLE}
        assert tables[QUAD_TABLE].splitlines()[0] == (
            '"id_subject","id_predicate","id_object","id_named_graph","validity"'
        )
        assert len(tables[QUAD_TABLE].splitlines()) == 1 + 5
        assert len(tables[VNG_TABLE].splitlines()) == 1 + 5
        assert len(tables[VERSION_TABLE].splitlines()) == 1 + 3

    def test_validities_as_text(self, sample_snapshot):
        rows = export_tables(sample_snapshot)[QUAD_TABLE].splitlines()[1:]
        assert sorted(row.rsplit(",", 1)[1] for row in rows) == ['"001"', '"011"', '"011"', '"101"', '"111"']

    def test_export_csv_writes_files(self, sample_store, tmp_path):
        written = sample_store.export_csv(tmp_path / "csv")
        assert sorted(path.name for path in written) == sorted(
            f"{table}.csv" for table in (DICTIONARY_TABLE, VERSION_TABLE, VNG_TABLE, QUAD_TABLE, METADATA_TABLE)
        )
        assert all(path.read_text().count("\n") >= 2 for path in written)
