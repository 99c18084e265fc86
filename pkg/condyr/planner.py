"""Translation of SPARQL algebra into condensed-algebra plans."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

from condyr.algebra import (
    Aggregate,
    AlgebraNode,
    Group,
    Join,
    MetadataGraph,
    Project,
    QuadPattern,
    Var,
    in_scope,
    quad_patterns,
    user_variables,
)
from condyr.constants import BITSTRING_PREFIX, GRAPH_PREFIX, VAR_PREFIX
from condyr.exceptions import UnknownVariableError, UnsupportedFeatureError
from condyr.models import Term, TermId
from condyr.store import StoreSnapshot
from condyr.utils import log


class Repr(IntEnum):
    """Column representation; the higher one is lowered when join sides disagree."""

    ID = 0
    CONDENSED = 1


@dataclass(frozen=True)
class ColumnSpec:
    var: str
    repr: Repr = Repr.ID
    # Not visible to the user: implicit graph variables, bound graph
    # positions and condensed columns carried for their multiplicity.
    hidden: bool = False
    # Holds a count rather than a term id.
    numeric: bool = False

    @property
    def columns(self) -> Tuple[str, ...]:
        if self.repr is Repr.CONDENSED:
            return (f"{GRAPH_PREFIX}{self.var}", f"{BITSTRING_PREFIX}{self.var}")
        return (f"{VAR_PREFIX}{self.var}",)

    def describe(self) -> str:
        text = "+".join(self.columns)
        return f"({text})" if self.hidden else text


@dataclass(frozen=True)
class BoundTerm:
    position: str
    term: Term
    term_id: Optional[TermId]


@dataclass(frozen=True)
class Scan:
    """Pattern over ``versioned_quad`` (source ``quads``) or ``metadata``."""

    source: str
    bound: Tuple[BoundTerm, ...]
    # position -> variable for the first occurrence of each variable
    bindings: Tuple[Tuple[str, str], ...]
    # positions that must hold the same id (repeated variables)
    equalities: Tuple[Tuple[str, str], ...]
    columns: Tuple[ColumnSpec, ...]
    # A bound term is missing from the dictionary; no row can match.
    empty: bool = False


@dataclass(frozen=True)
class BitJoin:
    left: "PlanNode"
    right: "PlanNode"
    id_keys: Tuple[str, ...]
    graph_keys: Tuple[str, ...]
    columns: Tuple[ColumnSpec, ...]


@dataclass(frozen=True)
class Lower:
    sub: "PlanNode"
    var: str
    columns: Tuple[ColumnSpec, ...]


@dataclass(frozen=True)
class GroupBy:
    sub: "PlanNode"
    keys: Tuple[str, ...]
    aggregates: Tuple[Aggregate, ...]
    # condensed columns of ``sub`` whose popcounts multiply into every count
    multiplicity: Tuple[str, ...]
    columns: Tuple[ColumnSpec, ...]


@dataclass(frozen=True)
class Finalize:
    sub: "PlanNode"
    projection: Tuple[str, ...]
    carriers: Tuple[str, ...]
    columns: Tuple[ColumnSpec, ...]


PlanNode = Union[Scan, BitJoin, Lower, GroupBy, Finalize]


def column_map(node: PlanNode) -> Dict[str, ColumnSpec]:
    return {spec.var: spec for spec in node.columns}


def children(node: PlanNode) -> Tuple[PlanNode, ...]:
    if isinstance(node, BitJoin):
        return (node.left, node.right)
    if isinstance(node, (Lower, GroupBy, Finalize)):
        return (node.sub,)
    return ()


def walk(node: PlanNode) -> Iterator[PlanNode]:
    """Preorder traversal."""
    yield node
    for child in children(node):
        yield from walk(child)


@dataclass
class Planner:
    """Builds plans against one store snapshot."""

    snapshot: StoreSnapshot
    _reserved: Set[str] = field(default_factory=set)
    _hidden_counter: int = 0

    def plan(self, node: AlgebraNode) -> Finalize:
        self._reserved = {name for pattern in quad_patterns(node) for name in _pattern_names(pattern)}
        self._reserved.update(in_scope(node))
        self._hidden_counter = 0
        if isinstance(node, Project):
            sub = self._plan_pattern_tree(node.sub)
            plan = self.finalize(sub, node.vars)
        else:
            sub = self._plan_pattern_tree(node)
            names = in_scope(node) if isinstance(node, Group) else user_variables(node)
            plan = self.finalize(sub, tuple(names))
        log("DEBUG", "Plan:\n" + explain(plan))
        return plan

    def _plan_pattern_tree(self, node: AlgebraNode) -> PlanNode:
        if isinstance(node, QuadPattern):
            return self.plan_quad_pattern(node)
        if isinstance(node, Join):
            return self.plan_join(self._plan_pattern_tree(node.left), self._plan_pattern_tree(node.right))
        if isinstance(node, Group):
            return self.plan_group(self._plan_pattern_tree(node.sub), node.keys, node.aggregates)
        if isinstance(node, Project):
            raise UnsupportedFeatureError("subqueries")
        raise TypeError(f"not an algebra node: {node!r}")

    def _hidden_var(self) -> str:
        while True:
            name = f"_c{self._hidden_counter}"
            self._hidden_counter += 1
            if name not in self._reserved:
                self._reserved.add(name)
                return name

    # --- quad patterns --------------------------------------------------------

    def plan_quad_pattern(self, pattern: QuadPattern) -> Scan:
        dictionary = self.snapshot.dictionary
        metadata = isinstance(pattern.g, MetadataGraph)
        positions = [("s", pattern.s), ("p", pattern.p), ("o", pattern.o)]
        if not metadata:
            positions.append(("g", pattern.g))

        bound: List[BoundTerm] = []
        bindings: List[Tuple[str, str]] = []
        equalities: List[Tuple[str, str]] = []
        first_position: Dict[str, str] = {}
        for pos, value in positions:
            if isinstance(value, Var):
                if value.name in first_position:
                    if pos == "g" or first_position[value.name] == "g":
                        raise UnsupportedFeatureError(f"graph variable ?{value.name} reused inside its own pattern")
                    equalities.append((first_position[value.name], pos))
                else:
                    first_position[value.name] = pos
                    bindings.append((pos, value.name))
            else:
                bound.append(BoundTerm(pos, value, dictionary.lookup(value)))

        columns: List[ColumnSpec] = []
        for pos, name in bindings:
            if pos == "g":
                columns.append(ColumnSpec(name, Repr.CONDENSED, hidden=pattern.implicit_graph))
            else:
                columns.append(ColumnSpec(name))
        if not metadata and not isinstance(pattern.g, Var):
            hidden = self._hidden_var()
            bindings.append(("g", hidden))
            columns.append(ColumnSpec(hidden, Repr.CONDENSED, hidden=True))

        return Scan(
            source="metadata" if metadata else "quads",
            bound=tuple(bound),
            bindings=tuple(bindings),
            equalities=tuple(equalities),
            columns=tuple(columns),
            empty=any(b.term_id is None for b in bound),
        )

    # --- joins ----------------------------------------------------------------

    def plan_join(self, left: PlanNode, right: PlanNode) -> BitJoin:
        left_cols = column_map(left)
        right_cols = column_map(right)
        shared = [var for var in left_cols if var in right_cols]
        for var in shared:
            l_repr, r_repr = left_cols[var].repr, right_cols[var].repr
            if l_repr < r_repr:
                right = self.lower(right, var)
            elif r_repr < l_repr:
                left = self.lower(left, var)
        left_cols = column_map(left)
        right_cols = column_map(right)
        id_keys = tuple(var for var in shared if left_cols[var].repr is Repr.ID)
        graph_keys = tuple(var for var in shared if left_cols[var].repr is Repr.CONDENSED)
        columns = tuple(left.columns) + tuple(spec for spec in right.columns if spec.var not in left_cols)
        return BitJoin(left, right, id_keys, graph_keys, columns)

    def lower(self, sub: PlanNode, var: str) -> Lower:
        specs = column_map(sub)
        if var not in specs:
            raise UnknownVariableError(f"?{var} is not in scope")
        if specs[var].repr is not Repr.CONDENSED:
            raise ValueError(f"?{var} is not condensed")
        columns = tuple(
            ColumnSpec(spec.var, Repr.ID, hidden=spec.hidden) if spec.var == var else spec for spec in sub.columns
        )
        return Lower(sub, var, columns)

    # --- grouping -------------------------------------------------------------

    def plan_group(self, sub: PlanNode, keys: Tuple[str, ...], aggregates: Tuple[Aggregate, ...]) -> GroupBy:
        specs = column_map(sub)
        for key in keys:
            if key not in specs or specs[key].hidden:
                raise UnknownVariableError(f"GROUP BY ?{key}: variable is not in scope")
        for aggregate in aggregates:
            if aggregate.var is not None and (aggregate.var not in specs or specs[aggregate.var].hidden):
                raise UnknownVariableError(f"{aggregate.function}(?{aggregate.var}): variable is not in scope")
        to_lower = list(keys) + [a.var for a in aggregates if a.function in ("MIN", "MAX") and a.var]
        for var in to_lower:
            if column_map(sub)[var].repr is Repr.CONDENSED:
                sub = self.lower(sub, var)
        multiplicity = tuple(spec.var for spec in sub.columns if spec.repr is Repr.CONDENSED)
        columns = tuple(ColumnSpec(key) for key in keys) + tuple(
            ColumnSpec(a.alias, numeric=a.function == "COUNT") for a in aggregates
        )
        return GroupBy(sub, tuple(keys), tuple(aggregates), multiplicity, columns)

    # --- projection -----------------------------------------------------------

    def finalize(self, sub: PlanNode, projection: Tuple[str, ...]) -> Finalize:
        specs = column_map(sub)
        for var in projection:
            if var not in specs or specs[var].hidden:
                raise UnknownVariableError(f"?{var} is projected but not in scope")
        carriers = tuple(
            spec.var for spec in sub.columns if spec.repr is Repr.CONDENSED and spec.var not in projection
        )
        columns = tuple(specs[var] for var in projection) + tuple(
            ColumnSpec(var, Repr.CONDENSED, hidden=True) for var in carriers
        )
        return Finalize(sub, tuple(projection), carriers, columns)


def _pattern_names(pattern: QuadPattern) -> List[str]:
    return [v.name for v in (pattern.s, pattern.p, pattern.o, pattern.g) if isinstance(v, Var)]


def plan_query(node: AlgebraNode, snapshot: StoreSnapshot) -> Finalize:
    return Planner(snapshot).plan(node)


# --- explain ------------------------------------------------------------------


def _columns_text(node: PlanNode) -> str:
    return "[" + ", ".join(spec.describe() for spec in node.columns) + "]"


def _describe(node: PlanNode) -> str:
    if isinstance(node, Scan):
        parts = [f"Scan {node.source}"]
        parts.extend(
            f"{b.position}={b.term.n3()}#{b.term_id if b.term_id is not None else '?'}" for b in node.bound
        )
        parts.extend(f"{a}={b}" for a, b in node.equalities)
        if node.empty:
            parts.append("EMPTY")
        return " ".join(parts)
    if isinstance(node, BitJoin):
        keys = ", ".join([f"v${k}" for k in node.id_keys] + [f"ng${k}" for k in node.graph_keys])
        ands = ", ".join(f"bs${k}" for k in node.graph_keys)
        return f"BitJoin on ({keys})" + (f" and ({ands})" if ands else "")
    if isinstance(node, Lower):
        return f"Lower ?{node.var}"
    if isinstance(node, GroupBy):
        keys = ", ".join(f"?{k}" for k in node.keys)
        aggregates = ", ".join(str(a) for a in node.aggregates)
        mult = ", ".join(f"bs${m}" for m in node.multiplicity)
        return f"GroupBy ({keys}) {aggregates} multiplicity=({mult})"
    return "Finalize " + " ".join(f"?{v}" for v in node.projection)


def explain(node: PlanNode, indent: int = 0) -> str:
    """Human-readable plan, one node per line, children indented."""
    lines = [f"{'  ' * indent}{_describe(node)} {_columns_text(node)}"]
    for child in children(node):
        lines.append(explain(child, indent + 1))
    return "\n".join(lines)
