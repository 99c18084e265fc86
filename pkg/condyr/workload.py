"""Generated versioned datasets and subset queries for selftest and benchmarks."""

from __future__ import annotations

import random
from typing import List, Optional, Sequence, Set

from condyr.algebra import (
    METADATA,
    Aggregate,
    AlgebraNode,
    Group,
    Project,
    QuadPattern,
    TermOrVar,
    Var,
    join_all,
    user_variables,
)
from condyr.models import Term, Vocabulary
from condyr.store import StoreSnapshot, TermQuad, VersionedQuadStore

KNOWS = Term.iri("ex:knows")
LIKES = Term.iri("ex:likes")
FOLLOWS = Term.iri("ex:follows")
PREDICATES = (KNOWS, LIKES, FOLLOWS)
FOODS = ("pizza", "sushi", "ramen", "tacos")

NODE_VARS = ("a", "b", "c")
GRAPH_VARS = ("g", "h")
MISSING = Term.iri("ex:missing")


def person(index: int) -> Term:
    return Term.iri(f"ex:person{index}")


def graph(index: int) -> Term:
    return Term.iri(f"ex:g{index}")


def _quad_key(quad: TermQuad):
    return tuple(term.sort_key() for term in quad)


def random_quad(rng: random.Random, persons: int, graphs: int) -> TermQuad:
    predicate = rng.choice(PREDICATES)
    if predicate == LIKES and rng.random() < 0.5:
        obj = Term.literal(rng.choice(FOODS))
    else:
        obj = person(rng.randrange(persons))
    return (person(rng.randrange(persons)), predicate, obj, graph(rng.randrange(graphs)))


def generate_snapshots(
    rng: random.Random,
    versions: int,
    quads: int,
    graphs: int,
    overlap: float,
    persons: Optional[int] = None,
) -> List[List[TermQuad]]:
    """Snapshots of ``quads`` distinct quads each; ``overlap`` of every version carries into the next."""
    if versions < 1 or quads < 1 or graphs < 1:
        raise ValueError("versions, quads and graphs must be positive")
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    persons = persons or max(3, quads)
    capacity = persons * graphs * (2 * persons + len(FOODS))
    if quads > capacity:
        raise ValueError(f"cannot draw {quads} distinct quads from {capacity} candidates")

    snapshots: List[List[TermQuad]] = []
    for _ in range(versions):
        current: Set[TermQuad] = set()
        if snapshots:
            previous = snapshots[-1]
            current.update(rng.sample(previous, round(len(previous) * overlap)))
        while len(current) < quads:
            current.add(random_quad(rng, persons, graphs))
        snapshots.append(sorted(current, key=_quad_key))
    return snapshots


def build_store(
    snapshots: Sequence[Sequence[TermQuad]],
    vocabulary: Optional[Vocabulary] = None,
    allow_empty: bool = True,
) -> VersionedQuadStore:
    store = VersionedQuadStore(vocabulary=vocabulary, allow_empty_snapshot=allow_empty)
    for snapshot in snapshots:
        store.ingest_version(snapshot)
    return store


# --- queries ------------------------------------------------------------------


class _QueryDraw:
    def __init__(self, rng: random.Random, snapshot: StoreSnapshot) -> None:
        self.rng = rng
        self.snapshot = snapshot
        nodes: Set[Term] = set()
        objects: Set[Term] = set()
        graphs: Set[Term] = set()
        resolve = snapshot.dictionary.resolve
        for quad in snapshot.quads():
            nodes.add(resolve(quad.s))
            objects.add(resolve(quad.o))
            graphs.add(resolve(quad.g))
        self.subjects = sorted(nodes, key=Term.sort_key) or [MISSING]
        self.objects = sorted(objects, key=Term.sort_key) or [MISSING]
        self.graphs = sorted(graphs, key=Term.sort_key) or [MISSING]

    def node(self, pool: Sequence[Term]) -> TermOrVar:
        roll = self.rng.random()
        if roll < 0.65:
            return Var(self.rng.choice(NODE_VARS))
        if roll < 0.97:
            return self.rng.choice(pool)
        return MISSING

    def predicate(self) -> TermOrVar:
        if self.rng.random() < 0.15:
            return Var("p")
        return self.rng.choice(PREDICATES)

    def pattern(self) -> QuadPattern:
        s, p, o = self.node(self.subjects), self.predicate(), self.node(self.objects)
        roll = self.rng.random()
        if roll < 0.55:
            return QuadPattern(s, p, o, Var(self.rng.choice(GRAPH_VARS)))
        if roll < 0.8:
            return QuadPattern(s, p, o, Var("_g"), implicit_graph=True)
        return QuadPattern(s, p, o, self.rng.choice(self.graphs))

    def bgp(self, size: int) -> AlgebraNode:
        return join_all([self.pattern() for _ in range(size)])

    def metadata_pattern(self, graph_var: str) -> QuadPattern:
        vocabulary = self.snapshot.vocabulary
        roll = self.rng.random()
        if roll < 0.5:
            return QuadPattern(Var(graph_var), Term.iri(vocabulary.in_version), Var("v"), METADATA)
        if roll < 0.75:
            version = self.rng.randint(1, max(self.snapshot.version_count, 1))
            return QuadPattern(Var(graph_var), Term.iri(vocabulary.in_version), Term.literal(str(version)), METADATA)
        return QuadPattern(Var(graph_var), Term.iri(vocabulary.version_of), Var("x"), METADATA)

    def metadata_join(self) -> AlgebraNode:
        graph_var = self.rng.choice(GRAPH_VARS)
        patterns: List[AlgebraNode] = [self.pattern() for _ in range(self.rng.randint(0, 1))]
        s, p, o = self.node(self.subjects), self.predicate(), self.node(self.objects)
        patterns.insert(self.rng.randrange(len(patterns) + 1), QuadPattern(s, p, o, Var(graph_var)))
        patterns.append(self.metadata_pattern(graph_var))
        return join_all(patterns)

    def grouped(self) -> AlgebraNode:
        tree = self.bgp(self.rng.randint(1, 2))
        names = user_variables(tree)
        if not names:
            return tree
        key = self.rng.choice(names)
        counted = self.rng.choice(list(names) + [None])
        aggregate = Aggregate("COUNT", counted, "count")
        return Project(Group(tree, (key,), (aggregate,)), (key, "count"))

    def projected(self, tree: AlgebraNode) -> AlgebraNode:
        names = user_variables(tree)
        if not names or self.rng.random() < 0.7:
            return tree
        keep = self.rng.sample(names, self.rng.randint(1, len(names)))
        return Project(tree, tuple(name for name in names if name in keep))


def random_query(rng: random.Random, snapshot: StoreSnapshot) -> AlgebraNode:
    """A query from the supported subset, biased towards terms present in ``snapshot``.

    Shapes: basic graph patterns of one to three quad patterns sharing node
    and graph variables, joins with the metadata graph, and single-key
    GROUP BY with COUNT.
    """
    draw = _QueryDraw(rng, snapshot)
    roll = rng.random()
    if roll < 0.5:
        return draw.projected(draw.bgp(rng.randint(1, 3)))
    if roll < 0.75:
        return draw.projected(draw.metadata_join())
    return draw.grouped()
