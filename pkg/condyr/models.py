"""Data models for condyr."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Optional, Tuple

from condyr.constants import (
    DEFAULT_IN_VERSION_IRI,
    DEFAULT_METADATA_GRAPH_IRI,
    DEFAULT_REPETITIONS,
    DEFAULT_SELFTEST_ROUNDS,
    DEFAULT_STORE_PATH,
    DEFAULT_VERSION_OF_IRI,
    DEFAULT_VNG_PREFIX,
    DEFAULT_WARMUP,
    LANG_TAG_RE,
)
from condyr.exceptions import InvalidTermError
from condyr.utils import escape_text

TermId = int


class TermKind(str, Enum):
    IRI = "iri"
    LITERAL = "literal"
    BLANK = "blank"


@dataclass(frozen=True)
class Term:
    """An RDF resource or literal; equality is structural over all four fields."""

    lexical: str
    kind: TermKind = TermKind.IRI
    datatype: Optional[str] = None
    lang: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind is not TermKind.LITERAL and (self.datatype is not None or self.lang is not None):
            raise InvalidTermError(f"{self.kind.value} term '{self.lexical}' cannot carry a datatype or language")
        if self.lang is not None and self.datatype is not None:
            raise InvalidTermError(f"literal '{self.lexical}' has both a language tag and a datatype")
        if self.lang is not None and not LANG_TAG_RE.match(self.lang):
            raise InvalidTermError(f"invalid language tag '{self.lang}'")
        if self.kind is not TermKind.LITERAL and not self.lexical:
            raise InvalidTermError(f"empty {self.kind.value} label")

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls(value, TermKind.IRI)

    @classmethod
    def literal(cls, value: str, datatype: Optional[str] = None, lang: Optional[str] = None) -> "Term":
        return cls(value, TermKind.LITERAL, datatype, lang)

    @classmethod
    def blank(cls, label: str) -> "Term":
        return cls(label, TermKind.BLANK)

    def n3(self) -> str:
        """Render in N-Triples syntax."""
        if self.kind is TermKind.IRI:
            return f"<{self.lexical}>"
        if self.kind is TermKind.BLANK:
            return f"_:{self.lexical}"
        text = f'"{escape_text(self.lexical)}"'
        if self.lang is not None:
            return f"{text}@{self.lang}"
        if self.datatype is not None:
            return f"{text}^^<{self.datatype}>"
        return text

    def sort_key(self) -> Tuple[str, str, str, str]:
        return (self.kind.value, self.lexical, self.datatype or "", self.lang or "")

    def digest(self) -> str:
        """SHA-256 of the N-Triples form; backs the dictionary lookup index."""
        return hashlib.sha256(self.n3().encode("utf-8")).hexdigest()


QuadKey = Tuple[TermId, TermId, TermId, TermId]


@dataclass(frozen=True)
class CondensedQuad:
    s: TermId
    p: TermId
    o: TermId
    g: TermId
    validity: int

    @property
    def key(self) -> QuadKey:
        return (self.s, self.p, self.o, self.g)


class VersionedNamedGraph(NamedTuple):
    vng_id: TermId
    graph_id: TermId
    version_index: int


class MetadataTriple(NamedTuple):
    s: TermId
    p: TermId
    o: TermId


class QuadPatternKey(NamedTuple):
    """Bound ids per position; ``None`` is a wildcard."""

    s: Optional[TermId] = None
    p: Optional[TermId] = None
    o: Optional[TermId] = None
    g: Optional[TermId] = None

    def bound_positions(self) -> str:
        return "".join(pos for pos, value in zip("spog", self) if value is not None)


@dataclass(frozen=True)
class Vocabulary:
    """IRIs the store writes into its metadata relation."""

    in_version: str = DEFAULT_IN_VERSION_IRI
    version_of: str = DEFAULT_VERSION_OF_IRI
    vng_prefix: str = DEFAULT_VNG_PREFIX

    def vng_iri(self, ordinal: int) -> str:
        return f"{self.vng_prefix}{ordinal}"


@dataclass(frozen=True)
class StoreStats:
    version_count: int
    quad_count: int
    term_count: int
    vng_count: int
    flat_row_count: int


@dataclass
class ScanCounters:
    """Logical work counters for benchmarks and index-contract checks."""

    rows_scanned: int = 0
    index_probes: int = 0
    and_ops: int = 0

    def merge(self, other: "ScanCounters") -> None:
        self.rows_scanned += other.rows_scanned
        self.index_probes += other.index_probes
        self.and_ops += other.and_ops


@dataclass
class Config:
    store_path: Path = DEFAULT_STORE_PATH
    metadata_graph: str = DEFAULT_METADATA_GRAPH_IRI
    inline_ids: bool = False
    output_format: str = "tsv"
    stable_sort: bool = False
    repetitions: int = DEFAULT_REPETITIONS
    warmup: int = DEFAULT_WARMUP
    allow_empty_snapshot: bool = False
    selftest_rounds: int = DEFAULT_SELFTEST_ROUNDS
    pg_url: Optional[str] = None
