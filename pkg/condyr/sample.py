"""Built-in sample: three versions of a small social graph and four reference queries.

The condensed table below is the whole dataset; the per-version snapshots
are derived from it. Versioned named graphs are numbered in registration
order (version by version, graphs in order of first appearance), so g1 in
version 3 is ``vng4`` and g2 in version 2 is ``vng3``.
"""

from __future__ import annotations

import operator
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Tuple

from condyr.executor import Executor, display_rows, solutions
from condyr.models import Term
from condyr.oracle import evaluate, materialize_flat
from condyr.planner import plan_query
from condyr.sparql import parse
from condyr.store import TermQuad, VersionedQuadStore
from condyr.utils import log

ALICE = Term.iri("ex:alice")
BOB = Term.iri("ex:bob")
CAROL = Term.iri("ex:carol")
KNOWS = Term.iri("ex:knows")
LIKES = Term.iri("ex:likes")
PIZZA = Term.literal("pizza")
SUSHI = Term.literal("sushi")
G1 = Term.iri("ex:g1")
G2 = Term.iri("ex:g2")

# (subject, predicate, object, graph, versions)
SAMPLE_TABLE: Tuple[Tuple[Term, Term, Term, Term, Tuple[int, ...]], ...] = (
    (ALICE, KNOWS, BOB, G1, (1, 2, 3)),
    (BOB, LIKES, PIZZA, G1, (2, 3)),
    (ALICE, LIKES, SUSHI, G1, (1, 3)),
    (CAROL, KNOWS, ALICE, G2, (3,)),
    (BOB, KNOWS, CAROL, G2, (2, 3)),
)
SAMPLE_VERSIONS = 3
# (versions, distinct quads, flat rows)
SAMPLE_STATS = (3, 5, 10)


def sample_snapshots() -> List[List[TermQuad]]:
    snapshots: List[List[TermQuad]] = [[] for _ in range(SAMPLE_VERSIONS)]
    for s, p, o, g, versions in SAMPLE_TABLE:
        for version in versions:
            snapshots[version - 1].append((s, p, o, g))
    return snapshots


def build_sample_store() -> VersionedQuadStore:
    store = VersionedQuadStore()
    for index, snapshot in enumerate(sample_snapshots(), start=1):
        store.ingest_version(snapshot, label=f"v{index}")
    return store


def write_sample_files(directory: Path) -> List[Path]:
    """Write one N-Quads file per sample version."""
    from condyr.nquads import write_snapshot

    return [
        write_snapshot(snapshot, Path(directory) / f"v{index}.nq")
        for index, snapshot in enumerate(sample_snapshots(), start=1)
    ]


# --- reference queries ----------------------------------------------------------

KNOWS_PATTERN = "?s <ex:knows> ?o ?g .\n"

JOIN_ON_GRAPH = "?s <ex:knows> ?o ?g .\n?o <ex:likes> ?liked ?g .\n"

JOIN_WITH_METADATA = "?s <ex:knows> ?o ?g .\n?g <v:in-version> ?v <ng:Metadata> .\n"

COUNT_BY_OBJECT = """SELECT ?o (COUNT(?s) AS ?count)
WHERE {
    ?s <ex:knows> ?o ?g .
}
GROUP BY ?o
"""


@dataclass(frozen=True)
class GoldenQuery:
    name: str
    text: str
    columns: Tuple[str, ...]
    rows: Tuple[tuple, ...]

    @property
    def expected(self) -> Counter:
        return Counter(self.rows)


def _vng(ordinal: int) -> str:
    return f"<urn:condyr:vng{ordinal}>"


GOLDEN_QUERIES: Tuple[GoldenQuery, ...] = (
    GoldenQuery(
        "knows",
        KNOWS_PATTERN,
        ("v$s", "v$o", "ng$g", "bs$g"),
        (
            ("<ex:alice>", "<ex:bob>", "<ex:g1>", "111"),
            ("<ex:carol>", "<ex:alice>", "<ex:g2>", "001"),
            ("<ex:bob>", "<ex:carol>", "<ex:g2>", "011"),
        ),
    ),
    GoldenQuery(
        "join-on-graph",
        JOIN_ON_GRAPH,
        ("v$s", "v$o", "ng$g", "bs$g", "v$liked"),
        (("<ex:alice>", "<ex:bob>", "<ex:g1>", "011", '"pizza"'),),
    ),
    GoldenQuery(
        "join-with-metadata",
        JOIN_WITH_METADATA,
        ("v$s", "v$o", "v$g", "v$v"),
        (
            ("<ex:alice>", "<ex:bob>", _vng(1), '"1"'),
            ("<ex:alice>", "<ex:bob>", _vng(2), '"2"'),
            ("<ex:alice>", "<ex:bob>", _vng(4), '"3"'),
            ("<ex:carol>", "<ex:alice>", _vng(5), '"3"'),
            ("<ex:bob>", "<ex:carol>", _vng(3), '"2"'),
            ("<ex:bob>", "<ex:carol>", _vng(5), '"3"'),
        ),
    ),
    GoldenQuery(
        "count-by-object",
        COUNT_BY_OBJECT,
        ("v$o", "v$count"),
        (("<ex:bob>", 3), ("<ex:alice>", 1), ("<ex:carol>", 2)),
    ),
)


def golden_query(name: str) -> GoldenQuery:
    for query in GOLDEN_QUERIES:
        if query.name == name:
            return query
    raise KeyError(name)


def run_golden(combine: Callable[[int, int], int] = operator.and_) -> List[str]:
    """Check the reference queries against their expected rows; returns failure messages."""
    store = build_sample_store()
    snapshot = store.snapshot()
    failures: List[str] = []
    stats = snapshot.stats()
    if (stats.version_count, stats.quad_count, stats.flat_row_count) != SAMPLE_STATS:
        failures.append(
            f"sample stats: expected V, quads, flat rows = {SAMPLE_STATS}, got "
            f"{(stats.version_count, stats.quad_count, stats.flat_row_count)}"
        )
    flat = materialize_flat(snapshot)
    for query in GOLDEN_QUERIES:
        node = parse(query.text)
        table = Executor(snapshot, combine=combine).execute(plan_query(node, snapshot))
        header = tuple(col.name for col in table.visible_columns)
        if header != query.columns:
            failures.append(f"{query.name}: expected columns {query.columns}, got {header}")
        got = Counter(display_rows(table, snapshot.dictionary))
        if got != query.expected:
            failures.append(
                f"{query.name}: expected {sorted(query.expected.elements())}, got {sorted(got.elements())}"
            )
        if solutions(table, snapshot) != evaluate(node, flat):
            failures.append(f"{query.name}: flattened result differs from the flat evaluation")
    if failures:
        log("DEBUG", f"Golden suite: {len(failures)} failures")
    return failures
