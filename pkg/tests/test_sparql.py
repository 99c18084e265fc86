"""Tests for condyr.sparql module."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condyr.algebra import (
    METADATA,
    Aggregate,
    Group,
    Join,
    Project,
    QuadPattern,
    Var,
    in_scope,
    to_sparql,
    user_variables,
)
from condyr.constants import RDF_TYPE_IRI, XSD_BOOLEAN_IRI, XSD_DECIMAL_IRI, XSD_INTEGER_IRI
from condyr.exceptions import QuerySyntaxError, UndefinedPrefixError, UnsupportedFeatureError
from condyr.models import Term
from condyr.sample import (
    COUNT_BY_OBJECT,
    GOLDEN_QUERIES,
    JOIN_ON_GRAPH,
    JOIN_WITH_METADATA,
    KNOWS_PATTERN,
    build_sample_store,
)
from condyr.sparql import expand_prefixes, parse
from condyr.workload import random_query

KNOWS = Term.iri("ex:knows")
LIKES = Term.iri("ex:likes")
SAMPLE_SNAPSHOT = build_sample_store().snapshot()


class TestSampleQueries:
    def test_single_pattern(self):
        assert parse(KNOWS_PATTERN) == QuadPattern(Var("s"), KNOWS, Var("o"), Var("g"))

    def test_join_on_graph(self):
        assert parse(JOIN_ON_GRAPH) == Join(
            QuadPattern(Var("s"), KNOWS, Var("o"), Var("g")),
            QuadPattern(Var("o"), LIKES, Var("liked"), Var("g")),
        )

    def test_metadata_graph(self):
        tree = parse(JOIN_WITH_METADATA)
        assert tree.right == QuadPattern(Var("g"), Term.iri("v:in-version"), Var("v"), METADATA)
        assert tree.right.targets_metadata

    def test_custom_metadata_graph(self):
        tree = parse("?g <v:in-version> ?v <ex:meta> .", metadata_graph="ex:meta")
        assert tree.g is METADATA
        tree = parse("?g <v:in-version> ?v <ng:Metadata> .", metadata_graph="ex:meta")
        assert tree.g == Term.iri("ng:Metadata")

    def test_group_by(self):
        assert parse(COUNT_BY_OBJECT) == Project(
            Group(
                QuadPattern(Var("s"), KNOWS, Var("o"), Var("g")),
                ("o",),
                (Aggregate("COUNT", "s", "count"),),
            ),
            ("o", "count"),
        )


class TestSelect:
    def test_select_star_excludes_implicit_graph(self):
        tree = parse("SELECT * WHERE { ?s <ex:knows> ?o . ?o <ex:likes> ?x }")
        assert isinstance(tree, Project)
        assert tree.vars == ("s", "o", "x")
        patterns = [tree.sub.left, tree.sub.right]
        assert all(p.implicit_graph and p.g == Var("_g") for p in patterns)

    def test_implicit_graph_avoids_user_names(self):
        tree = parse("SELECT ?_g WHERE { ?_g <ex:knows> ?o }")
        assert tree.sub.g == Var("__g")
        assert user_variables(tree.sub) == ["_g", "o"]

    def test_where_keyword_optional(self):
        assert parse("SELECT ?s { ?s ?p ?o ?g }") == parse("SELECT ?s WHERE { ?s ?p ?o ?g }")

    def test_dollar_variables(self):
        assert parse("$s <ex:knows> $o $g .") == parse(KNOWS_PATTERN)

    def test_braced_pattern(self):
        assert parse("{ ?s <ex:knows> ?o ?g }") == parse(KNOWS_PATTERN)

    def test_graph_clause(self):
        tree = parse("SELECT * WHERE { GRAPH ?g { ?s <ex:knows> ?o . ?o <ex:likes> ?x } }")
        assert tree.sub == Join(
            QuadPattern(Var("s"), KNOWS, Var("o"), Var("g")),
            QuadPattern(Var("o"), LIKES, Var("x"), Var("g")),
        )

    def test_aggregates(self):
        tree = parse("SELECT (COUNT(*) AS ?n) (MIN(?o) AS ?lo) (MAX(?o) AS ?hi) WHERE { ?s ?p ?o ?g }")
        assert tree.sub.keys == ()
        assert tree.sub.aggregates == (
            Aggregate("COUNT", None, "n"),
            Aggregate("MIN", "o", "lo"),
            Aggregate("MAX", "o", "hi"),
        )
        assert in_scope(tree) == ["n", "lo", "hi"]

    def test_group_by_several_keys(self):
        tree = parse("SELECT ?s ?g (COUNT(?o) AS ?n) WHERE { ?s ?p ?o ?g } GROUP BY ?s ?g")
        assert tree.sub.keys == ("s", "g")

    def test_comments_ignored(self):
        assert parse("# who knows whom\n?s <ex:knows> ?o ?g . # trailing\n") == parse(KNOWS_PATTERN)


class TestTerms:
    def test_prefixes(self):
        tree = parse("PREFIX ex: <http://example.org/>\nSELECT ?s WHERE { ?s ex:knows ?o ?g }")
        assert tree.sub.p == Term.iri("http://example.org/knows")

    def test_empty_prefix(self):
        tree = parse("PREFIX : <http://example.org/>\n?s :knows ?o ?g .")
        assert tree.p == Term.iri("http://example.org/knows")

    def test_a_is_rdf_type(self):
        assert parse("?s a <ex:Person> ?g .").p == Term.iri(RDF_TYPE_IRI)

    def test_literals(self):
        tree = parse(
            "?s <ex:p> \"chat\"@fr ?g . ?s <ex:q> 'x'^^<ex:dt> ?g . "
            "?s <ex:r> 30 ?g . ?s <ex:t> 1.5 ?g . ?s <ex:u> true ?g ."
        )
        objects = []
        node = tree
        while isinstance(node, Join):
            objects.insert(0, node.right.o)
            node = node.left
        objects.insert(0, node.o)
        assert objects == [
            Term.literal("chat", lang="fr"),
            Term.literal("x", datatype="ex:dt"),
            Term.literal("30", datatype=XSD_INTEGER_IRI),
            Term.literal("1.5", datatype=XSD_DECIMAL_IRI),
            Term.literal("true", datatype=XSD_BOOLEAN_IRI),
        ]

    def test_string_escapes(self):
        assert parse('?s <ex:p> "a\\"b\\n" ?g .').o == Term.literal('a"b\n')


class TestErrors:
    @pytest.mark.parametrize(
        "text, feature",
        [
            ("SELECT * WHERE { ?s ?p ?o ?g FILTER (?o) }", "FILTER"),
            ("SELECT * WHERE { ?s ?p ?o ?g OPTIONAL { ?s ?q ?x ?g } }", "OPTIONAL"),
            ("SELECT * WHERE { ?s ?p ?o ?g UNION }", "UNION"),
            ("SELECT * WHERE { ?s ?p ?o ?g } ORDER BY ?s", "ORDER BY"),
            ("SELECT * WHERE { ?s ?p ?o ?g } LIMIT 10", "LIMIT"),
            ("SELECT DISTINCT ?s WHERE { ?s ?p ?o ?g }", "DISTINCT"),
            ("SELECT (SUM(?o) AS ?t) WHERE { ?s ?p ?o ?g }", "SUM"),
            ("?s <ex:knows>/<ex:likes> ?o ?g .", "property paths"),
            ("_:b <ex:knows> ?o ?g .", "blank nodes in queries"),
            ("[] <ex:knows> ?o ?g .", "blank nodes in queries"),
            ("?s <ex:knows> ?o ; <ex:likes> ?x .", "predicate-object lists"),
            ("SELECT * WHERE { }", "empty group pattern"),
        ],
    )
    def test_unsupported_features(self, text, feature):
        with pytest.raises(UnsupportedFeatureError) as exc:
            parse(text)
        assert exc.value.feature == feature

    def test_unsupported_feature_position(self):
        with pytest.raises(UnsupportedFeatureError) as exc:
            parse("SELECT * WHERE {\n  ?s ?p ?o ?g .\n  FILTER (?o)\n}")
        assert (exc.value.line, exc.value.column) == (3, 3)

    def test_syntax_error_position(self):
        with pytest.raises(QuerySyntaxError) as exc:
            parse("SELECT ?s WHERE { ?s ?p }")
        assert (exc.value.line, exc.value.column) == (1, 25)
        assert "unexpected '}'" in str(exc.value)

    def test_unexpected_end(self):
        with pytest.raises(QuerySyntaxError, match="unexpected end of query"):
            parse("SELECT ?s WHERE { ?s ?p ?o")

    def test_undefined_prefix(self):
        with pytest.raises(UndefinedPrefixError) as exc:
            parse("?s foo:bar ?o ?g .")
        assert exc.value.prefix == "foo"
        assert (exc.value.line, exc.value.column) == (1, 4)

    def test_unknown_word(self):
        with pytest.raises(QuerySyntaxError, match="unexpected word 'knows'"):
            parse("?s knows ?o ?g .")

    def test_select_star_with_group_by(self):
        with pytest.raises(QuerySyntaxError, match="SELECT \\*"):
            parse("SELECT * WHERE { ?s ?p ?o ?g } GROUP BY ?s")

    def test_duplicate_projection(self):
        with pytest.raises(QuerySyntaxError, match="more than once"):
            parse("SELECT ?s ?s WHERE { ?s ?p ?o ?g }")

    def test_alias_already_bound(self):
        with pytest.raises(QuerySyntaxError, match="already bound"):
            parse("SELECT (COUNT(*) AS ?s) WHERE { ?s ?p ?o ?g }")

    def test_nested_graph_position(self):
        with pytest.raises(QuerySyntaxError, match="inside a GRAPH clause"):
            parse("SELECT * WHERE { GRAPH ?g { ?s ?p ?o ?h } }")

    def test_literal_graph_rejected(self):
        with pytest.raises(QuerySyntaxError, match="graph position"):
            parse('?s ?p ?o "g" .')


class TestCanonicalText:
    @pytest.mark.parametrize("query", GOLDEN_QUERIES, ids=lambda q: q.name)
    def test_golden_round_trip(self, query):
        tree = parse(query.text)
        assert parse(to_sparql(tree)) == tree

    def test_implicit_graph_not_written(self):
        text = to_sparql(parse("SELECT ?s WHERE { ?s <ex:knows> ?o }"))
        assert text == "SELECT ?s WHERE {\n  ?s <ex:knows> ?o .\n}\n"

    @settings(max_examples=200, deadline=None)
    @given(rng=st.randoms(use_true_random=False))
    def test_generated_queries_round_trip(self, rng):
        tree = random_query(rng, SAMPLE_SNAPSHOT)
        assert parse(to_sparql(tree)) == tree


class TestExpandPrefixes:
    def test_expands_and_drops_declarations(self):
        text = "PREFIX ex: <http://e/>\nSELECT ?s WHERE { ?s ex:p ?o ?g }"
        assert expand_prefixes(text) == "SELECT ?s WHERE { ?s <http://e/p> ?o ?g }"

    def test_without_prefixes_unchanged(self):
        assert expand_prefixes(KNOWS_PATTERN) == KNOWS_PATTERN

    def test_expanded_text_parses_identically(self):
        text = "PREFIX ex: <http://e/>\nSELECT ?s WHERE { ?s ex:p ?o ?g }"
        assert parse(expand_prefixes(text)) == parse(text)

    def test_undefined_prefix(self):
        with pytest.raises(UndefinedPrefixError):
            expand_prefixes("?s ex:p ?o ?g .")
