"""Bidirectional term dictionary (the ``resource_or_literal`` relation)."""

from __future__ import annotations

import threading
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from condyr.exceptions import UnknownIdError
from condyr.models import Term, TermId


class TermDictionary:
    """Interns terms to dense positive ids; ids are never reused.

    Lookups go through a digest index, the in-memory counterpart of the
    digest column of ``resource_or_literal``. Interning is serialized by a
    lock; readers never block.
    """

    def __init__(self) -> None:
        self._terms: List[Term] = []
        self._by_digest: Dict[str, List[TermId]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._terms)

    def __contains__(self, term: object) -> bool:
        return isinstance(term, Term) and self.lookup(term) is not None

    def intern(self, term: Term) -> TermId:
        existing = self.lookup(term)
        if existing is not None:
            return existing
        with self._lock:
            existing = self.lookup(term)
            if existing is not None:
                return existing
            self._terms.append(term)
            term_id = len(self._terms)
            self._by_digest.setdefault(term.digest(), []).append(term_id)
            return term_id

    def lookup(self, term: Term) -> Optional[TermId]:
        for candidate in self._by_digest.get(term.digest(), ()):
            if self._terms[candidate - 1] == term:
                return candidate
        return None

    def resolve(self, term_id: TermId) -> Term:
        if not isinstance(term_id, int) or term_id < 1 or term_id > len(self._terms):
            raise UnknownIdError(f"Term id {term_id!r} was never issued")
        return self._terms[term_id - 1]

    def items(self) -> Iterator[Tuple[TermId, Term]]:
        # Snapshot the length so concurrent interning does not leak in.
        for index in range(len(self._terms)):
            yield index + 1, self._terms[index]

    @classmethod
    def from_terms(cls, terms: Iterable[Term]) -> "TermDictionary":
        """Rebuild a dictionary whose ids are the 1-based positions of ``terms``."""
        dictionary = cls()
        for term in terms:
            if dictionary.lookup(term) is not None:
                raise ValueError(f"duplicate dictionary term {term.n3()}")
            dictionary.intern(term)
        return dictionary
