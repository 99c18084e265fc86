"""Flat baseline: one row per (quad, version) and a naive evaluator over it.

No indexes and no bitstrings; every pattern scans the whole flat table.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple

from condyr.algebra import (
    AlgebraNode,
    Group,
    Join,
    MetadataGraph,
    Project,
    QuadPattern,
    Var,
    in_scope,
    user_variables,
)
from condyr.dictionary import TermDictionary
from condyr.exceptions import InvariantViolation, UnknownVariableError, UnsupportedFeatureError
from condyr.models import MetadataTriple, QuadKey, ScanCounters, TermId
from condyr.store import StoreSnapshot
from condyr.utils import version_bit

Binding = Dict[str, object]


class FlatRow(NamedTuple):
    s: TermId
    p: TermId
    o: TermId
    vng_id: TermId
    graph_id: TermId
    version_index: int


@dataclass(frozen=True)
class FlatStore:
    rows: Tuple[FlatRow, ...]
    dictionary: TermDictionary
    metadata: Tuple[MetadataTriple, ...]


def materialize_flat(snapshot: StoreSnapshot) -> FlatStore:
    rows = []
    for quad, version in snapshot.flat_rows():
        vng_id = snapshot.vng_id(quad.g, version)
        if vng_id is None:
            raise InvariantViolation(f"graph {quad.g} has data in version {version} but no registry entry")
        rows.append(FlatRow(quad.s, quad.p, quad.o, vng_id, quad.g, version))
    return FlatStore(tuple(rows), snapshot.dictionary, snapshot.metadata)


def condense(flat: FlatStore) -> Dict[QuadKey, int]:
    """Group flat rows by quad and OR their version bits."""
    validities: Dict[QuadKey, int] = {}
    for row in flat.rows:
        key = (row.s, row.p, row.o, row.graph_id)
        validities[key] = validities.get(key, 0) | version_bit(row.version_index)
    return validities


def _bind(binding: Binding, var: str, value: object) -> bool:
    if var in binding:
        return binding[var] == value
    binding[var] = value
    return True


def _match(pattern: QuadPattern, flat: FlatStore, counters: Optional[ScanCounters]) -> List[Binding]:
    graph_vars = {pattern.g.name} if isinstance(pattern.g, Var) else set()
    for position in (pattern.s, pattern.p, pattern.o):
        if isinstance(position, Var) and position.name in graph_vars:
            raise UnsupportedFeatureError(f"graph variable ?{position.name} reused inside its own pattern")

    def resolve(term) -> Optional[TermId]:
        return flat.dictionary.lookup(term)

    metadata = isinstance(pattern.g, MetadataGraph)
    if metadata:
        candidates = [(t.s, t.p, t.o, None, None) for t in flat.metadata]
    else:
        candidates = [(r.s, r.p, r.o, r.vng_id, r.graph_id) for r in flat.rows]
    if counters is not None:
        counters.rows_scanned += len(candidates)

    out = []
    for s, p, o, vng_id, graph_id in candidates:
        binding: Binding = {}
        ok = True
        for position, value in ((pattern.s, s), (pattern.p, p), (pattern.o, o)):
            if isinstance(position, Var):
                ok = _bind(binding, position.name, value)
            else:
                ok = resolve(position) == value
            if not ok:
                break
        if ok and not metadata:
            if isinstance(pattern.g, Var):
                ok = _bind(binding, pattern.g.name, vng_id)
            else:
                ok = resolve(pattern.g) == graph_id
        if ok:
            out.append(binding)
    return out


def _evaluate(node: AlgebraNode, flat: FlatStore, counters: Optional[ScanCounters]) -> List[Binding]:
    if isinstance(node, QuadPattern):
        return _match(node, flat, counters)
    if isinstance(node, Join):
        out = []
        rights = _evaluate(node.right, flat, counters)
        for left in _evaluate(node.left, flat, counters):
            for right in rights:
                if all(left[var] == right[var] for var in left.keys() & right.keys()):
                    out.append({**left, **right})
        return out
    if isinstance(node, Group):
        return _group(node, flat, counters)
    raise UnsupportedFeatureError(f"nested {type(node).__name__}")


def _group(node: Group, flat: FlatStore, counters: Optional[ScanCounters]) -> List[Binding]:
    scope = set(user_variables(node.sub))
    for key in node.keys:
        if key not in scope:
            raise UnknownVariableError(f"GROUP BY ?{key}: variable is not in scope")
    for aggregate in node.aggregates:
        if aggregate.var is not None and aggregate.var not in scope:
            raise UnknownVariableError(f"{aggregate.function}(?{aggregate.var}): variable is not in scope")
    groups: Dict[tuple, List[Binding]] = {}
    for binding in _evaluate(node.sub, flat, counters):
        groups.setdefault(tuple(binding[key] for key in node.keys), []).append(binding)
    if not groups and not node.keys:
        groups[()] = []
    out = []
    for key, members in groups.items():
        row: Binding = dict(zip(node.keys, key))
        for aggregate in node.aggregates:
            if aggregate.function == "COUNT":
                row[aggregate.alias] = len(members)
            else:
                values = [member[aggregate.var] for member in members]
                pick = min if aggregate.function == "MIN" else max
                row[aggregate.alias] = pick(values) if values else None
        out.append(row)
    return out


def evaluate(node: AlgebraNode, flat: FlatStore, counters: Optional[ScanCounters] = None) -> Counter:
    """Bag of projected solutions, comparable with ``executor.solutions``."""
    if isinstance(node, Project):
        sub, projection = node.sub, node.vars
        available = set(in_scope(sub)) if isinstance(sub, Group) else set(user_variables(sub))
        for var in projection:
            if var not in available:
                raise UnknownVariableError(f"?{var} is projected but not in scope")
    else:
        sub, projection = node, tuple(user_variables(node))
    bag: Counter = Counter()
    for binding in _evaluate(sub, flat, counters):
        bag[tuple(sorted((var, binding[var]) for var in projection))] += 1
    return bag
