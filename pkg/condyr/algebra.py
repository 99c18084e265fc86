"""SPARQL algebra trees for the supported query subset."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple, Union

from condyr.constants import DEFAULT_METADATA_GRAPH_IRI
from condyr.models import Term


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class MetadataGraph:
    """Marker for the reserved graph holding version provenance triples."""

    def __str__(self) -> str:
        return "<metadata>"


METADATA = MetadataGraph()

TermOrVar = Union[Term, Var]
GraphRef = Union[Term, Var, MetadataGraph]


@dataclass(frozen=True)
class QuadPattern:
    s: TermOrVar
    p: TermOrVar
    o: TermOrVar
    g: GraphRef
    # The graph variable was assigned to a bare triple pattern, not written by the user.
    implicit_graph: bool = False

    @property
    def targets_metadata(self) -> bool:
        return isinstance(self.g, MetadataGraph)


@dataclass(frozen=True)
class Join:
    left: "AlgebraNode"
    right: "AlgebraNode"


@dataclass(frozen=True)
class Aggregate:
    function: str  # COUNT, MIN or MAX
    var: Optional[str]  # None means COUNT(*)
    alias: str

    def __str__(self) -> str:
        arg = "*" if self.var is None else f"?{self.var}"
        return f"{self.function}({arg}) AS ?{self.alias}"


@dataclass(frozen=True)
class Group:
    sub: "AlgebraNode"
    keys: Tuple[str, ...]
    aggregates: Tuple[Aggregate, ...] = ()


@dataclass(frozen=True)
class Project:
    sub: "AlgebraNode"
    vars: Tuple[str, ...]


AlgebraNode = Union[QuadPattern, Join, Group, Project]


def quad_patterns(node: AlgebraNode) -> Iterator[QuadPattern]:
    """Leaves in textual order."""
    if isinstance(node, QuadPattern):
        yield node
    elif isinstance(node, Join):
        yield from quad_patterns(node.left)
        yield from quad_patterns(node.right)
    elif isinstance(node, (Group, Project)):
        yield from quad_patterns(node.sub)
    else:
        raise TypeError(f"not an algebra node: {node!r}")


def pattern_variables(pattern: QuadPattern) -> List[str]:
    names: List[str] = []
    for position in (pattern.s, pattern.p, pattern.o, pattern.g):
        if isinstance(position, Var) and position.name not in names:
            names.append(position.name)
    return names


def in_scope(node: AlgebraNode) -> List[str]:
    """Variables visible above ``node`` in first-mention order."""
    if isinstance(node, Project):
        return list(node.vars)
    if isinstance(node, Group):
        return list(node.keys) + [agg.alias for agg in node.aggregates]
    names: List[str] = []
    for pattern in quad_patterns(node):
        for name in pattern_variables(pattern):
            if name not in names:
                names.append(name)
    return names


def user_variables(node: AlgebraNode) -> List[str]:
    """Like :func:`in_scope` over patterns, minus implicit graph variables."""
    implicit = {p.g.name for p in quad_patterns(node) if p.implicit_graph and isinstance(p.g, Var)}
    names: List[str] = []
    for pattern in quad_patterns(node):
        for name in pattern_variables(pattern):
            if name not in names and name not in implicit:
                names.append(name)
    return names


def join_all(nodes: List[AlgebraNode]) -> AlgebraNode:
    """Left-deep join in list order."""
    if not nodes:
        raise ValueError("cannot join an empty pattern list")
    tree = nodes[0]
    for node in nodes[1:]:
        tree = Join(tree, node)
    return tree


# --- canonical text ----------------------------------------------------------


def _render(position: Union[TermOrVar, GraphRef], metadata_graph: str) -> str:
    if isinstance(position, Var):
        return str(position)
    if isinstance(position, MetadataGraph):
        return f"<{metadata_graph}>"
    return position.n3()


def _pattern_line(pattern: QuadPattern, metadata_graph: str) -> str:
    parts = [pattern.s, pattern.p, pattern.o] + ([] if pattern.implicit_graph else [pattern.g])
    return " ".join(_render(part, metadata_graph) for part in parts) + " ."


def to_sparql(node: AlgebraNode, metadata_graph: str = DEFAULT_METADATA_GRAPH_IRI) -> str:
    """Canonical query text; parsing it yields ``node`` again."""
    projection: Optional[Project] = node if isinstance(node, Project) else None
    inner = projection.sub if projection else node
    group: Optional[Group] = inner if isinstance(inner, Group) else None
    body = group.sub if group else inner
    lines = ["  " + _pattern_line(p, metadata_graph) for p in quad_patterns(body)]
    if projection is None and group is None:
        return "\n".join(line.strip() for line in lines) + "\n"

    aggregates = {agg.alias: agg for agg in group.aggregates} if group else {}
    if projection is not None:
        select = [f"({aggregates[name]})" if name in aggregates else f"?{name}" for name in projection.vars]
    else:
        select = [f"?{key}" for key in group.keys] + [f"({agg})" for agg in group.aggregates]
    text = f"SELECT {' '.join(select) if select else '*'} WHERE {{\n" + "\n".join(lines) + "\n}"
    if group is not None and group.keys:
        text += " GROUP BY " + " ".join(f"?{key}" for key in group.keys)
    return text + "\n"
