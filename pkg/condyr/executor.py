"""In-memory evaluation of condensed plans."""

from __future__ import annotations

import itertools
import json
import math
import operator
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from condyr.constants import BITSTRING_PREFIX, GRAPH_PREFIX, VAR_PREFIX
from condyr.dictionary import TermDictionary
from condyr.exceptions import InvariantViolation
from condyr.models import QuadPatternKey, ScanCounters, Term, TermId
from condyr.planner import BitJoin, ColumnSpec, Finalize, GroupBy, Lower, PlanNode, Repr, Scan
from condyr.store import StoreSnapshot
from condyr.utils import log, popcount, set_versions, validity_to_text

Row = Dict[str, object]

ID = "id"
BITSTRING = "bitstring"
NUMBER = "number"


@dataclass(frozen=True)
class ResultColumn:
    name: str
    var: str
    kind: str
    hidden: bool = False


@dataclass(frozen=True)
class ResultTable:
    columns: Tuple[ResultColumn, ...]
    rows: Tuple[tuple, ...]
    width: int

    @property
    def visible_columns(self) -> Tuple[ResultColumn, ...]:
        return tuple(col for col in self.columns if not col.hidden)

    def column_index(self, name: str) -> int:
        for index, col in enumerate(self.columns):
            if col.name == name:
                return index
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class FlatRow:
    """One solution per combination of set bits across the bitstring columns."""

    bindings: Tuple[Tuple[str, object], ...]
    versions: Tuple[Tuple[str, TermId, int], ...]  # (var, graph id, version index)


def result_columns(specs: Iterable[ColumnSpec]) -> Tuple[ResultColumn, ...]:
    columns: List[ResultColumn] = []
    for spec in specs:
        if spec.repr is Repr.CONDENSED:
            ng, bs = spec.columns
            columns.append(ResultColumn(ng, spec.var, ID, spec.hidden))
            columns.append(ResultColumn(bs, spec.var, BITSTRING, spec.hidden))
        else:
            columns.append(ResultColumn(spec.columns[0], spec.var, NUMBER if spec.numeric else ID, spec.hidden))
    return tuple(columns)


class Executor:
    """Evaluates plans over one immutable snapshot with bag semantics.

    ``combine`` merges the bitstrings of a shared graph variable in a join;
    it is bitwise AND except under fault injection.
    """

    def __init__(
        self,
        snapshot: StoreSnapshot,
        counters: Optional[ScanCounters] = None,
        combine: Callable[[int, int], int] = operator.and_,
    ) -> None:
        self.snapshot = snapshot
        self.counters = counters if counters is not None else ScanCounters()
        self.combine = combine

    def execute(self, plan: PlanNode) -> ResultTable:
        rows = self._eval(plan)
        columns = result_columns(plan.columns)
        table = ResultTable(
            columns=columns,
            rows=tuple(tuple(row[col.name] for col in columns) for row in rows),
            width=self.snapshot.version_count,
        )
        log(
            "DEBUG",
            f"Executed plan: {len(table)} rows, scanned={self.counters.rows_scanned} "
            f"probes={self.counters.index_probes} and_ops={self.counters.and_ops}",
        )
        return table

    def _eval(self, node: PlanNode) -> List[Row]:
        if isinstance(node, Scan):
            return self._scan(node)
        if isinstance(node, BitJoin):
            return self._join(node)
        if isinstance(node, Lower):
            return self._lower(node)
        if isinstance(node, GroupBy):
            return self._group(node)
        if isinstance(node, Finalize):
            names = [col.name for col in result_columns(node.columns)]
            return [{name: row[name] for name in names} for row in self._eval(node.sub)]
        raise TypeError(f"cannot execute {type(node).__name__}")

    def _scan(self, node: Scan) -> List[Row]:
        if node.empty:
            return []
        bound = {b.position: b.term_id for b in node.bound}
        if node.source == "quads":
            matches = (
                (quad.s, quad.p, quad.o, quad.g, quad.validity)
                for quad in self.snapshot.quads_matching(QuadPatternKey(**bound), self.counters)
            )
        else:
            triples = self.snapshot.metadata_matching(bound.get("s"), bound.get("p"), bound.get("o"), self.counters)
            matches = ((t.s, t.p, t.o, None, None) for t in triples)
        index = {"s": 0, "p": 1, "o": 2, "g": 3}
        rows: List[Row] = []
        for match in matches:
            if any(match[index[a]] != match[index[b]] for a, b in node.equalities):
                continue
            row: Row = {}
            for pos, var in node.bindings:
                if pos == "g":
                    row[f"{GRAPH_PREFIX}{var}"] = match[3]
                    row[f"{BITSTRING_PREFIX}{var}"] = match[4]
                else:
                    row[f"{VAR_PREFIX}{var}"] = match[index[pos]]
            rows.append(row)
        return rows

    def _join(self, node: BitJoin) -> List[Row]:
        left = self._eval(node.left)
        right = self._eval(node.right)
        keys = [f"{VAR_PREFIX}{k}" for k in node.id_keys] + [f"{GRAPH_PREFIX}{k}" for k in node.graph_keys]
        anded = [f"{BITSTRING_PREFIX}{k}" for k in node.graph_keys]
        build, probe, build_is_left = (left, right, True) if len(left) <= len(right) else (right, left, False)
        table: Dict[tuple, List[Row]] = defaultdict(list)
        for row in build:
            table[tuple(row[k] for k in keys)].append(row)
        out: List[Row] = []
        for probe_row in probe:
            for build_row in table.get(tuple(probe_row[k] for k in keys), ()):
                left_row, right_row = (build_row, probe_row) if build_is_left else (probe_row, build_row)
                merged = dict(right_row)
                merged.update(left_row)
                keep = True
                for bs in anded:
                    bits = self.combine(left_row[bs], right_row[bs])
                    self.counters.and_ops += 1
                    if popcount(bits) == 0:
                        keep = False
                        break
                    merged[bs] = bits
                if keep:
                    out.append(merged)
        return out

    def _lower(self, node: Lower) -> List[Row]:
        ng, bs, v = f"{GRAPH_PREFIX}{node.var}", f"{BITSTRING_PREFIX}{node.var}", f"{VAR_PREFIX}{node.var}"
        registry = self.snapshot.vng_index()
        out: List[Row] = []
        for row in self._eval(node.sub):
            bits = row[bs]
            for vng in registry.get(row[ng], ()):
                if (bits >> (vng.version_index - 1)) & 1:
                    lowered = {k: value for k, value in row.items() if k not in (ng, bs)}
                    lowered[v] = vng.vng_id
                    out.append(lowered)
        return out

    def _group(self, node: GroupBy) -> List[Row]:
        keys = [f"{VAR_PREFIX}{k}" for k in node.keys]
        bitstrings = [f"{BITSTRING_PREFIX}{m}" for m in node.multiplicity]
        groups: Dict[tuple, List] = {}
        for row in self._eval(node.sub):
            state = groups.setdefault(tuple(row[k] for k in keys), [None] * len(node.aggregates))
            multiplicity = math.prod(popcount(row[bs]) for bs in bitstrings)
            for index, aggregate in enumerate(node.aggregates):
                current = state[index]
                if aggregate.function == "COUNT":
                    state[index] = (current or 0) + multiplicity
                    continue
                value = row[f"{VAR_PREFIX}{aggregate.var}"]
                if current is None:
                    state[index] = value
                elif aggregate.function == "MIN":
                    state[index] = min(current, value)
                else:
                    state[index] = max(current, value)
        if not groups and not keys:
            groups[()] = [None] * len(node.aggregates)
        out: List[Row] = []
        for key, state in groups.items():
            row: Row = dict(zip(keys, key))
            for aggregate, value in zip(node.aggregates, state):
                if aggregate.function == "COUNT" and value is None:
                    value = 0
                row[f"{VAR_PREFIX}{aggregate.alias}"] = value
            out.append(row)
        return out


def execute(plan: PlanNode, snapshot: StoreSnapshot, counters: Optional[ScanCounters] = None) -> ResultTable:
    return Executor(snapshot, counters).execute(plan)


# --- result inspection ----------------------------------------------------------


def flatten(table: ResultTable) -> List[FlatRow]:
    """Expand every row into one row per combination of set bits."""
    condensed = [
        (col.var, table.column_index(f"{GRAPH_PREFIX}{col.var}"), index)
        for index, col in enumerate(table.columns)
        if col.kind == BITSTRING
    ]
    plain = [(col.var, index) for index, col in enumerate(table.columns) if col.name.startswith(VAR_PREFIX)]
    out: List[FlatRow] = []
    for row in table.rows:
        bindings = tuple((var, row[index]) for var, index in plain)
        choices = [
            [(var, row[ng_index], version) for version in set_versions(row[bs_index])]
            for var, ng_index, bs_index in condensed
        ]
        for combination in itertools.product(*choices):
            out.append(FlatRow(bindings, tuple(combination)))
    return out


def solutions(table: ResultTable, snapshot: StoreSnapshot) -> Counter:
    """Bag of visible bindings with condensed graph variables bound to versioned-graph ids."""
    hidden = {col.var for col in table.columns if col.hidden}
    bag: Counter = Counter()
    for flat in flatten(table):
        binding = {var: value for var, value in flat.bindings if var not in hidden}
        for var, graph_id, version in flat.versions:
            if var in hidden:
                continue
            vng_id = snapshot.vng_id(graph_id, version)
            if vng_id is None:
                raise InvariantViolation(f"no versioned named graph for graph {graph_id} in version {version}")
            binding[var] = vng_id
        bag[tuple(sorted(binding.items()))] += 1
    return bag


def decode(table: ResultTable, dictionary: TermDictionary) -> List[tuple]:
    """Visible cells as terms, '0'/'1' text for bitstrings and ints for counts."""
    visible = [(index, col) for index, col in enumerate(table.columns) if not col.hidden]
    rows = []
    for row in table.rows:
        cells = []
        for index, col in visible:
            value = row[index]
            if value is None:
                cells.append(None)
            elif col.kind == ID:
                cells.append(dictionary.resolve(value))
            elif col.kind == BITSTRING:
                cells.append(validity_to_text(value, table.width))
            else:
                cells.append(value)
        rows.append(tuple(cells))
    return rows


def display_rows(table: ResultTable, dictionary: TermDictionary) -> List[tuple]:
    """Decoded rows with terms in N-Triples form."""
    return [
        tuple(cell.n3() if isinstance(cell, Term) else cell for cell in row) for row in decode(table, dictionary)
    ]


def render_table(table: ResultTable, dictionary: TermDictionary, fmt: str = "tsv", stable_sort: bool = False) -> str:
    """Serialize visible columns as TSV (header + rows) or JSON lines."""
    header = [col.name for col in table.visible_columns]
    rows = [list(row) for row in display_rows(table, dictionary)]
    if stable_sort:
        rows.sort(key=lambda row: ["" if cell is None else str(cell) for cell in row])
    if fmt == "json":
        return "".join(json.dumps(dict(zip(header, row)), ensure_ascii=False) + "\n" for row in rows)
    lines = ["\t".join(header)]
    lines.extend("\t".join("" if cell is None else str(cell) for cell in row) for row in rows)
    return "\n".join(lines) + "\n"
