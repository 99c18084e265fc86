"""Tests for condyr.dictionary module."""

from __future__ import annotations

import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from condyr.dictionary import TermDictionary
from condyr.exceptions import UnknownIdError
from condyr.models import Term
from tests.strategies import literals


class TestIntern:
    def test_ids_are_dense_and_stable(self):
        dictionary = TermDictionary()
        a = dictionary.intern(Term.iri("ex:a"))
        b = dictionary.intern(Term.iri("ex:b"))
        assert (a, b) == (1, 2)
        assert dictionary.intern(Term.iri("ex:a")) == a
        assert len(dictionary) == 2

    def test_resolve_inverts_intern(self):
        dictionary = TermDictionary()
        terms = [Term.iri("ex:a"), Term.literal("a"), Term.literal("a", lang="en"), Term.blank("a")]
        ids = [dictionary.intern(term) for term in terms]
        assert len(set(ids)) == 4
        assert [dictionary.resolve(term_id) for term_id in ids] == terms

    def test_lookup_does_not_intern(self):
        dictionary = TermDictionary()
        assert dictionary.lookup(Term.iri("ex:a")) is None
        assert len(dictionary) == 0
        assert Term.iri("ex:a") not in dictionary

    @given(st.lists(literals(), min_size=1, max_size=20))
    def test_literals_resolve_to_themselves(self, terms):
        dictionary = TermDictionary()
        ids = [dictionary.intern(term) for term in terms]
        assert [dictionary.resolve(term_id) for term_id in ids] == terms
        assert [dictionary.lookup(term) for term in terms] == ids
        assert len(dictionary) == len(set(terms))

    def test_concurrent_interning_gives_one_id_per_term(self):
        dictionary = TermDictionary()
        terms = [Term.iri(f"ex:t{i}") for i in range(50)]
        results = []

        def work():
            results.append([dictionary.intern(term) for term in terms])

        threads = [threading.Thread(target=work) for _ in range(4)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert len(dictionary) == 50
        assert all(ids == results[0] for ids in results)


class TestResolve:
    @pytest.mark.parametrize("term_id", [0, -1, 3, "1"])
    def test_unknown_id(self, term_id):
        dictionary = TermDictionary()
        dictionary.intern(Term.iri("ex:a"))
        dictionary.intern(Term.iri("ex:b"))
        with pytest.raises(UnknownIdError, match="never issued"):
            dictionary.resolve(term_id)


class TestFromTerms:
    def test_positions_become_ids(self):
        dictionary = TermDictionary.from_terms([Term.iri("ex:b"), Term.iri("ex:a")])
        assert dictionary.lookup(Term.iri("ex:b")) == 1
        assert list(dictionary.items()) == [(1, Term.iri("ex:b")), (2, Term.iri("ex:a"))]

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            TermDictionary.from_terms([Term.iri("ex:a"), Term.iri("ex:a")])
