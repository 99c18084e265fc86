"""Tests for condyr.oracle module."""

from __future__ import annotations

import pytest

from condyr.exceptions import UnknownVariableError
from condyr.models import ScanCounters
from condyr.oracle import condense, evaluate, materialize_flat
from condyr.sample import COUNT_BY_OBJECT, JOIN_ON_GRAPH, KNOWS_PATTERN
from condyr.sparql import parse


class TestMaterialize:
    def test_one_row_per_quad_and_version(self, sample_snapshot):
        flat = materialize_flat(sample_snapshot)
        assert len(flat.rows) == 10
        assert {row.version_index for row in flat.rows} == {1, 2, 3}

    def test_rows_carry_their_versioned_graph(self, sample_snapshot):
        for row in materialize_flat(sample_snapshot).rows:
            assert sample_snapshot.vng_id(row.graph_id, row.version_index) == row.vng_id

    def test_condense_restores_validities(self, sample_snapshot):
        assert condense(materialize_flat(sample_snapshot)) == dict(sample_snapshot.validities)


class TestEvaluate:
    def test_single_pattern_counts_every_version(self, sample_snapshot):
        bag = evaluate(parse(KNOWS_PATTERN), materialize_flat(sample_snapshot))
        assert sum(bag.values()) == 6
        assert len(bag) == 6

    def test_join_on_graph(self, sample_snapshot):
        bag = evaluate(parse(JOIN_ON_GRAPH), materialize_flat(sample_snapshot))
        assert sum(bag.values()) == 2

    def test_group_count(self, sample_snapshot):
        dictionary = sample_snapshot.dictionary
        bag = evaluate(parse(COUNT_BY_OBJECT), materialize_flat(sample_snapshot))
        counts = {dictionary.resolve(dict(binding)["o"]).lexical: dict(binding)["count"] for binding in bag}
        assert counts == {"ex:bob": 3, "ex:alice": 1, "ex:carol": 2}

    def test_every_pattern_scans_the_whole_table(self, sample_snapshot):
        counters = ScanCounters()
        evaluate(parse(JOIN_ON_GRAPH), materialize_flat(sample_snapshot), counters)
        assert counters.rows_scanned == 2 * 10

    def test_unknown_projection(self, sample_snapshot):
        with pytest.raises(UnknownVariableError):
            evaluate(parse("SELECT ?x WHERE { ?s ?p ?o ?g }"), materialize_flat(sample_snapshot))

    def test_metadata_pattern(self, sample_snapshot):
        bag = evaluate(parse("?g <v:version-of> ?x <ng:Metadata> ."), materialize_flat(sample_snapshot))
        assert sum(bag.values()) == 5
