"""Condensed versioned quad store for condyr."""

from __future__ import annotations

import csv
import io
import threading
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from condyr.constants import (
    DICTIONARY_TABLE,
    INDEX_PERMUTATIONS,
    METADATA_TABLE,
    QUAD_TABLE,
    STORE_FORMAT,
    STORE_FORMAT_VERSION,
    VERSION_TABLE,
    VNG_TABLE,
)
from condyr.dictionary import TermDictionary
from condyr.exceptions import EmptySnapshotError, InvalidTermError, StoreFormatError
from condyr.models import (
    CondensedQuad,
    MetadataTriple,
    QuadKey,
    QuadPatternKey,
    ScanCounters,
    StoreStats,
    Term,
    TermId,
    TermKind,
    VersionedNamedGraph,
    Vocabulary,
)
from condyr.utils import (
    atomic_write_bytes,
    ensure_directory,
    escape_text,
    log,
    popcount,
    set_versions,
    sha256_hex,
    unescape_text,
    validity_from_text,
    validity_to_text,
    version_bit,
)

TermQuad = Tuple[Term, Term, Term, Term]

_POSITION = {"s": 0, "p": 1, "o": 2, "g": 3}


def _index_for(bound: FrozenSet[str]) -> str:
    """Pick the permutation whose columns after the graph cover ``bound`` as a prefix."""
    for perm in INDEX_PERMUTATIONS:
        if frozenset(perm[1 : 1 + len(bound)]) == bound:
            return perm
    raise AssertionError(f"no index covers {sorted(bound)}")  # pragma: no cover


_INDEX_FOR: Dict[FrozenSet[str], str] = {}
for _mask in range(8):
    _bound = frozenset(pos for bit, pos in enumerate("spo") if _mask & (1 << bit))
    _INDEX_FOR[_bound] = _index_for(_bound)


def _permute(key: QuadKey, perm: str) -> Tuple[int, ...]:
    return tuple(key[_POSITION[pos]] for pos in perm)


def _unpermute(entry: Tuple[int, ...], perm: str) -> QuadKey:
    values = dict(zip(perm, entry))
    return (values["s"], values["p"], values["o"], values["g"])


@dataclass(frozen=True)
class StoreSnapshot:
    """Immutable view of the store; every read operation runs against one."""

    dictionary: TermDictionary
    vocabulary: Vocabulary
    version_count: int = 0
    validities: Mapping[QuadKey, int] = field(default_factory=lambda: MappingProxyType({}))
    indexes: Mapping[str, Tuple[Tuple[int, ...], ...]] = field(
        default_factory=lambda: MappingProxyType({perm: () for perm in INDEX_PERMUTATIONS})
    )
    graph_ids: Tuple[TermId, ...] = ()
    vngs: Tuple[VersionedNamedGraph, ...] = ()
    metadata: Tuple[MetadataTriple, ...] = ()
    version_labels: Tuple[Optional[str], ...] = ()

    # --- quads -----------------------------------------------------------

    def quads_matching(
        self, pattern: QuadPatternKey, counters: Optional[ScanCounters] = None
    ) -> Iterator[CondensedQuad]:
        """Yield stored quads agreeing with every bound position of ``pattern``.

        Served by the permutation whose columns after the graph cover the
        bound subject/predicate/object positions; an unbound graph is
        handled by probing that index once per distinct graph.
        """
        bound = frozenset(pos for pos in "spo" if getattr(pattern, pos) is not None)
        perm = _INDEX_FOR[bound]
        index = self.indexes[perm]
        tail = tuple(getattr(pattern, pos) for pos in perm[1 : 1 + len(bound)])
        graphs: Sequence[TermId] = (pattern.g,) if pattern.g is not None else self.graph_ids
        for graph in graphs:
            prefix = (graph,) + tail
            upper = prefix[:-1] + (prefix[-1] + 1,)
            lo = bisect_left(index, prefix)
            hi = bisect_left(index, upper, lo)
            if counters is not None:
                counters.index_probes += 1
                counters.rows_scanned += hi - lo
            for position in range(lo, hi):
                key = _unpermute(index[position], perm)
                yield CondensedQuad(*key, self.validities[key])

    def quads(self) -> Iterator[CondensedQuad]:
        for key in sorted(self.validities):
            yield CondensedQuad(*key, self.validities[key])

    def flat_rows(self) -> Iterator[Tuple[CondensedQuad, int]]:
        """Expand every quad into one (quad, version) pair per set validity bit."""
        for quad in self.quads():
            for version in set_versions(quad.validity):
                yield quad, version

    # --- metadata and versioned named graphs ------------------------------

    def metadata_matching(
        self,
        s: Optional[TermId] = None,
        p: Optional[TermId] = None,
        o: Optional[TermId] = None,
        counters: Optional[ScanCounters] = None,
    ) -> Iterator[MetadataTriple]:
        if counters is not None:
            counters.rows_scanned += len(self.metadata)
        for triple in self.metadata:
            if s is not None and triple.s != s:
                continue
            if p is not None and triple.p != p:
                continue
            if o is not None and triple.o != o:
                continue
            yield triple

    def vng_for_graph(self, graph_id: TermId) -> List[VersionedNamedGraph]:
        return sorted((vng for vng in self.vngs if vng.graph_id == graph_id), key=lambda vng: vng.version_index)

    def vng_index(self) -> Dict[TermId, Tuple[VersionedNamedGraph, ...]]:
        """Registry entries grouped by graph id, each group ordered by version."""
        grouped: Dict[TermId, List[VersionedNamedGraph]] = {}
        for vng in self.vngs:
            grouped.setdefault(vng.graph_id, []).append(vng)
        return {graph: tuple(sorted(entries, key=lambda v: v.version_index)) for graph, entries in grouped.items()}

    def vng_id(self, graph_id: TermId, version_index: int) -> Optional[TermId]:
        for vng in self.vngs:
            if vng.graph_id == graph_id and vng.version_index == version_index:
                return vng.vng_id
        return None

    def version_label(self, version_index: int) -> Optional[str]:
        if not 1 <= version_index <= self.version_count:
            raise IndexError(f"version {version_index} out of range 1..{self.version_count}")
        return self.version_labels[version_index - 1]

    def stats(self) -> StoreStats:
        return StoreStats(
            version_count=self.version_count,
            quad_count=len(self.validities),
            term_count=len(self.dictionary),
            vng_count=len(self.vngs),
            flat_row_count=sum(popcount(bits) for bits in self.validities.values()),
        )


class VersionedQuadStore:
    """Single-writer store; readers work on immutable snapshots."""

    def __init__(self, vocabulary: Optional[Vocabulary] = None, allow_empty_snapshot: bool = False) -> None:
        self.dictionary = TermDictionary()
        self.vocabulary = vocabulary or Vocabulary()
        self.allow_empty_snapshot = allow_empty_snapshot
        self._snapshot = StoreSnapshot(dictionary=self.dictionary, vocabulary=self.vocabulary)
        self._write_lock = threading.Lock()

    def snapshot(self) -> StoreSnapshot:
        return self._snapshot

    # Read operations delegate to the current snapshot.

    @property
    def version_count(self) -> int:
        return self._snapshot.version_count

    def quads_matching(
        self, pattern: QuadPatternKey, counters: Optional[ScanCounters] = None
    ) -> Iterator[CondensedQuad]:
        return self._snapshot.quads_matching(pattern, counters)

    def metadata_matching(
        self,
        s: Optional[TermId] = None,
        p: Optional[TermId] = None,
        o: Optional[TermId] = None,
        counters: Optional[ScanCounters] = None,
    ) -> Iterator[MetadataTriple]:
        return self._snapshot.metadata_matching(s, p, o, counters)

    def vng_for_graph(self, graph_id: TermId) -> List[VersionedNamedGraph]:
        return self._snapshot.vng_for_graph(graph_id)

    def stats(self) -> StoreStats:
        return self._snapshot.stats()

    # --- writes ------------------------------------------------------------

    def ingest_version(
        self,
        snapshot: Iterable[TermQuad],
        label: Optional[str] = None,
        allow_empty: Optional[bool] = None,
    ) -> int:
        """Add one version; returns its 1-based index."""
        quads = sorted(set(snapshot), key=lambda quad: tuple(term.sort_key() for term in quad))
        if allow_empty is None:
            allow_empty = self.allow_empty_snapshot
        if not quads and not allow_empty:
            raise EmptySnapshotError("Snapshot contains no quads (set allow_empty_snapshot to ingest it anyway)")
        for quad in quads:
            graph = quad[3]
            if graph is None or graph.kind is TermKind.LITERAL:
                raise InvalidTermError(f"quad graph must be an IRI or blank node, got {graph!r}")
            if quad[1].kind is not TermKind.IRI:
                raise InvalidTermError(f"quad predicate must be an IRI, got {quad[1].n3()}")
            if quad[0].kind is TermKind.LITERAL:
                raise InvalidTermError(f"quad subject cannot be a literal, got {quad[0].n3()}")

        with self._write_lock:
            current = self._snapshot
            version = current.version_count + 1
            bit = version_bit(version)
            validities: Dict[QuadKey, int] = dict(current.validities)
            added: List[QuadKey] = []
            graphs: List[TermId] = []
            for s, p, o, g in quads:
                key = (
                    self.dictionary.intern(s),
                    self.dictionary.intern(p),
                    self.dictionary.intern(o),
                    self.dictionary.intern(g),
                )
                previous = validities.get(key)
                if previous is None:
                    added.append(key)
                    previous = 0
                validities[key] = previous | bit
                if key[3] not in graphs:
                    graphs.append(key[3])

            vngs = list(current.vngs)
            metadata = list(current.metadata)
            in_version = self.dictionary.intern(Term.iri(self.vocabulary.in_version)) if graphs else None
            version_of = self.dictionary.intern(Term.iri(self.vocabulary.version_of)) if graphs else None
            version_literal = self.dictionary.intern(Term.literal(str(version))) if graphs else None
            for graph in graphs:
                vng_id = self.dictionary.intern(Term.iri(self.vocabulary.vng_iri(len(vngs) + 1)))
                vngs.append(VersionedNamedGraph(vng_id, graph, version))
                metadata.append(MetadataTriple(vng_id, in_version, version_literal))
                metadata.append(MetadataTriple(vng_id, version_of, graph))

            self._snapshot = _build_snapshot(
                current,
                version_count=version,
                validities=validities,
                added=added,
                vngs=vngs,
                metadata=metadata,
                version_labels=current.version_labels + (label or None,),
            )
        log("INFO", f"Version {version}: {len(quads)} quads, {len(added)} new, {len(graphs)} graphs")
        return version

    def label_version(self, version_index: int, label: Optional[str]) -> None:
        with self._write_lock:
            current = self._snapshot
            if not 1 <= version_index <= current.version_count:
                raise IndexError(f"version {version_index} out of range 1..{current.version_count}")
            labels = list(current.version_labels)
            labels[version_index - 1] = label or None
            self._snapshot = _build_snapshot(current, version_labels=tuple(labels))

    def add_metadata(self, s: Term, p: Term, o: Term) -> MetadataTriple:
        """Record a user-defined metadata triple; duplicates are ignored."""
        with self._write_lock:
            current = self._snapshot
            triple = MetadataTriple(self.dictionary.intern(s), self.dictionary.intern(p), self.dictionary.intern(o))
            if triple not in current.metadata:
                self._snapshot = _build_snapshot(current, metadata=list(current.metadata) + [triple])
            return triple

    # --- persistence -----------------------------------------------------------

    def save(self, path: Path) -> None:
        with self._write_lock:
            payload = _encode_archive(self._snapshot)
            atomic_write_bytes(Path(path), payload)
        log("SUCCESS", f"Saved store to {path} ({len(payload)} bytes)")

    @classmethod
    def load(cls, path: Path) -> "VersionedQuadStore":
        path = Path(path)
        try:
            payload = path.read_bytes()
        except OSError as exc:
            raise StoreFormatError(f"Cannot read store {path}: {exc}")
        store = _decode_archive(payload, source=str(path))
        log("INFO", f"Loaded store {path}: V={store.version_count}")
        return store

    def export_csv(self, directory: Path) -> List[Path]:
        """Write one CSV per relation for bulk ``COPY … WITH (FORMAT csv, HEADER true)``."""
        directory = Path(directory)
        ensure_directory(directory)
        written = []
        for table, content in export_tables(self._snapshot).items():
            target = directory / f"{table}.csv"
            atomic_write_bytes(target, content.encode("utf-8"))
            written.append(target)
        log("SUCCESS", f"Exported {len(written)} relations to {directory}")
        return written


def _build_snapshot(
    current: StoreSnapshot,
    version_count: Optional[int] = None,
    validities: Optional[Dict[QuadKey, int]] = None,
    added: Sequence[QuadKey] = (),
    vngs: Optional[Sequence[VersionedNamedGraph]] = None,
    metadata: Optional[Sequence[MetadataTriple]] = None,
    version_labels: Optional[Tuple[Optional[str], ...]] = None,
) -> StoreSnapshot:
    indexes = current.indexes
    graph_ids = current.graph_ids
    if added:
        indexes = MappingProxyType(
            {
                perm: tuple(sorted(current.indexes[perm] + tuple(_permute(key, perm) for key in added)))
                for perm in INDEX_PERMUTATIONS
            }
        )
        graph_ids = tuple(sorted(set(graph_ids) | {key[3] for key in added}))
    return StoreSnapshot(
        dictionary=current.dictionary,
        vocabulary=current.vocabulary,
        version_count=current.version_count if version_count is None else version_count,
        validities=current.validities if validities is None else MappingProxyType(validities),
        indexes=indexes,
        graph_ids=graph_ids,
        vngs=current.vngs if vngs is None else tuple(vngs),
        metadata=current.metadata if metadata is None else tuple(metadata),
        version_labels=current.version_labels if version_labels is None else version_labels,
    )


# --- archive codec -------------------------------------------------------------


def _encode_archive(snapshot: StoreSnapshot) -> bytes:
    width = snapshot.version_count
    vocab = snapshot.vocabulary
    lines = [
        f"{STORE_FORMAT}\t{STORE_FORMAT_VERSION}",
        "\t".join(
            ["vocabulary", escape_text(vocab.in_version), escape_text(vocab.version_of), escape_text(vocab.vng_prefix)]
        ),
        f"versions\t{width}",
        f"dictionary\t{len(snapshot.dictionary)}",
    ]
    for term_id, term in snapshot.dictionary.items():
        lines.append(
            "\t".join(
                [
                    str(term_id),
                    term.kind.value,
                    escape_text(term.lexical),
                    escape_text(term.datatype or ""),
                    escape_text(term.lang or ""),
                ]
            )
        )
    lines.append(f"version\t{width}")
    for index, label in enumerate(snapshot.version_labels, start=1):
        lines.append(f"{index}\t{escape_text(label or '')}")
    quads = [quad for quad in snapshot.quads() if quad.validity]
    lines.append(f"quad\t{len(quads)}")
    for quad in quads:
        lines.append(f"{quad.s}\t{quad.p}\t{quad.o}\t{quad.g}\t{validity_to_text(quad.validity, width)}")
    lines.append(f"vng\t{len(snapshot.vngs)}")
    for vng in snapshot.vngs:
        lines.append(f"{vng.vng_id}\t{vng.graph_id}\t{vng.version_index}")
    lines.append(f"metadata\t{len(snapshot.metadata)}")
    for triple in snapshot.metadata:
        lines.append(f"{triple.s}\t{triple.p}\t{triple.o}")
    body = ("\n".join(lines) + "\n").encode("utf-8")
    return body + f"end\t{sha256_hex(body)}\n".encode("utf-8")


class _ArchiveReader:
    def __init__(self, lines: List[str], source: str) -> None:
        self._lines = lines
        self._pos = 0
        self._source = source

    def fail(self, message: str) -> StoreFormatError:
        return StoreFormatError(f"{self._source}: line {self._pos}: {message}")

    def fields(self, expected: int) -> List[str]:
        if self._pos >= len(self._lines):
            raise self.fail("unexpected end of archive")
        parts = self._lines[self._pos].split("\t")
        self._pos += 1
        if len(parts) != expected:
            raise self.fail(f"expected {expected} fields, got {len(parts)}")
        return parts

    def section(self, name: str) -> int:
        tag, count = self.fields(2)
        if tag != name:
            raise self.fail(f"expected section '{name}', got '{tag}'")
        return self.integer(count)

    def integer(self, raw: str, minimum: int = 0) -> int:
        try:
            value = int(raw)
        except ValueError:
            raise self.fail(f"not an integer: {raw!r}")
        if value < minimum:
            raise self.fail(f"value {value} below {minimum}")
        return value

    def text(self, raw: str) -> str:
        try:
            return unescape_text(raw)
        except ValueError as exc:
            raise self.fail(str(exc))

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._lines)


def _decode_archive(payload: bytes, source: str) -> VersionedQuadStore:
    body, sep, trailer = payload.rpartition(b"end\t")
    if not sep or not trailer.endswith(b"\n") or body and not body.endswith(b"\n"):
        raise StoreFormatError(f"{source}: truncated archive (missing end marker)")
    if trailer[:-1].decode("ascii", "replace") != sha256_hex(body):
        raise StoreFormatError(f"{source}: checksum mismatch, archive is corrupted")
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise StoreFormatError(f"{source}: archive is not UTF-8: {exc}")
    reader = _ArchiveReader(text.split("\n")[:-1], source)

    magic, version = reader.fields(2)
    if magic != STORE_FORMAT:
        raise reader.fail(f"not a {STORE_FORMAT} archive")
    if version != str(STORE_FORMAT_VERSION):
        raise reader.fail(f"format version {version} is not supported (expected {STORE_FORMAT_VERSION})")
    _, in_version, version_of, vng_prefix = reader.fields(4)
    vocabulary = Vocabulary(reader.text(in_version), reader.text(version_of), reader.text(vng_prefix))
    width = reader.section("versions")

    terms: List[Term] = []
    for expected_id in range(1, reader.section("dictionary") + 1):
        raw_id, kind, lexical, datatype, lang = reader.fields(5)
        if reader.integer(raw_id) != expected_id:
            raise reader.fail(f"dictionary ids must be dense, expected {expected_id}")
        try:
            terms.append(
                Term(
                    reader.text(lexical),
                    TermKind(kind),
                    reader.text(datatype) or None,
                    reader.text(lang) or None,
                )
            )
        except (ValueError, InvalidTermError) as exc:
            raise reader.fail(f"invalid term: {exc}")
    try:
        dictionary = TermDictionary.from_terms(terms)
    except ValueError as exc:
        raise reader.fail(str(exc))

    def term_id(raw: str) -> TermId:
        value = reader.integer(raw, minimum=1)
        if value > len(terms):
            raise reader.fail(f"reference to unknown term id {value}")
        return value

    if reader.section("version") != width:
        raise reader.fail("version section does not match version count")
    labels: List[Optional[str]] = []
    for expected_index in range(1, width + 1):
        raw_index, label = reader.fields(2)
        if reader.integer(raw_index) != expected_index:
            raise reader.fail(f"expected version {expected_index}")
        labels.append(reader.text(label) or None)

    validities: Dict[QuadKey, int] = {}
    for _ in range(reader.section("quad")):
        s, p, o, g, bits = reader.fields(5)
        if len(bits) != width:
            raise reader.fail(f"validity '{bits}' does not have width {width}")
        try:
            value = validity_from_text(bits)
        except ValueError as exc:
            raise reader.fail(str(exc))
        key = (term_id(s), term_id(p), term_id(o), term_id(g))
        if key in validities:
            raise reader.fail(f"duplicate quad {key}")
        if value == 0:
            log("WARN", f"{source}: dropping quad {key} with an all-zero validity")
            continue
        validities[key] = value

    vngs = []
    for _ in range(reader.section("vng")):
        vng_id, graph_id, index = reader.fields(3)
        version_index = reader.integer(index, minimum=1)
        if version_index > width:
            raise reader.fail(f"versioned named graph references version {version_index} > {width}")
        vngs.append(VersionedNamedGraph(term_id(vng_id), term_id(graph_id), version_index))
    if len({(vng.graph_id, vng.version_index) for vng in vngs}) != len(vngs):
        raise reader.fail("duplicate (graph, version) in versioned named graph registry")

    metadata = []
    for _ in range(reader.section("metadata")):
        s, p, o = reader.fields(3)
        metadata.append(MetadataTriple(term_id(s), term_id(p), term_id(o)))
    if not reader.exhausted:
        raise reader.fail("trailing records after metadata section")

    store = VersionedQuadStore(vocabulary=vocabulary)
    store.dictionary = dictionary
    empty = StoreSnapshot(dictionary=dictionary, vocabulary=vocabulary)
    store._snapshot = _build_snapshot(
        empty,
        version_count=width,
        validities=validities,
        added=sorted(validities),
        vngs=vngs,
        metadata=metadata,
        version_labels=tuple(labels),
    )
    return store


# --- CSV export --------------------------------------------------------------


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, quoting=csv.QUOTE_NONNUMERIC, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def export_tables(snapshot: StoreSnapshot) -> Dict[str, str]:
    """Render every relation as CSV text; ``None`` becomes a quoted empty field."""
    width = snapshot.version_count
    type_names = {TermKind.IRI: "resource", TermKind.LITERAL: "literal", TermKind.BLANK: "blank"}
    return {
        DICTIONARY_TABLE: _csv_text(
            ["id_resource_or_literal", "name", "type", "datatype", "lang", "digest"],
            (
                [term_id, term.lexical, type_names[term.kind], term.datatype, term.lang, term.digest()]
                for term_id, term in snapshot.dictionary.items()
            ),
        ),
        VERSION_TABLE: _csv_text(
            ["index_version", "label"],
            ([index, label] for index, label in enumerate(snapshot.version_labels, start=1)),
        ),
        VNG_TABLE: _csv_text(
            ["id_versioned_named_graph", "id_named_graph", "index_version"],
            ([vng.vng_id, vng.graph_id, vng.version_index] for vng in snapshot.vngs),
        ),
        QUAD_TABLE: _csv_text(
            ["id_subject", "id_predicate", "id_object", "id_named_graph", "validity"],
            ([q.s, q.p, q.o, q.g, validity_to_text(q.validity, width)] for q in snapshot.quads()),
        ),
        METADATA_TABLE: _csv_text(
            ["id_subject", "id_predicate", "id_object"],
            ([t.s, t.p, t.o] for t in snapshot.metadata),
        ),
    }
