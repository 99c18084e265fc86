"""PostgreSQL text for condensed plans and the relational schema."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from condyr.constants import (
    BITSTRING_PREFIX,
    DICTIONARY_TABLE,
    GRAPH_PREFIX,
    INDEX_PERMUTATIONS,
    METADATA_TABLE,
    QUAD_COLUMNS,
    QUAD_TABLE,
    VAR_PREFIX,
    VERSION_TABLE,
    VNG_TABLE,
)
from condyr.planner import (
    BitJoin,
    BoundTerm,
    ColumnSpec,
    Finalize,
    GroupBy,
    Lower,
    PlanNode,
    Repr,
    Scan,
)

INDENT = "  "


@dataclass(frozen=True)
class SqlFragment:
    text: str
    columns: Tuple[str, ...]
    aliases: int


@dataclass
class _Select:
    """A single SELECT block that can still absorb sibling comma joins."""

    exprs: Dict[str, str] = field(default_factory=dict)  # output column -> expression
    from_items: List[str] = field(default_factory=list)
    where: List[str] = field(default_factory=list)
    guards: Dict[str, str] = field(default_factory=dict)  # bs$ column -> nonzero guard


def _indent(text: str) -> str:
    return "\n".join(INDENT + line if line else line for line in text.split("\n"))


def _item(expr: str, name: str) -> str:
    return expr if expr.endswith(f".{name}") else f"{expr} AS {name}"


def _render(select_items: List[str], from_items: List[str], where: List[str]) -> str:
    lines = ["SELECT " + ", ".join(select_items) if select_items else "SELECT"]
    lines.append("FROM " + ", ".join(from_items))
    if where:
        lines.append("WHERE " + f"\n{INDENT}AND ".join(where))
    return "\n".join(lines)


def _mergeable(node: PlanNode) -> bool:
    """Scans and joins become comma-joined FROM items of the enclosing SELECT."""
    return isinstance(node, (Scan, BitJoin))


def physical_columns(specs: Tuple[ColumnSpec, ...]) -> Tuple[str, ...]:
    return tuple(col for spec in specs for col in spec.columns)


def _output_names(node: PlanNode) -> Dict[str, str]:
    """Physical column -> name it carries in the SELECT emitted for ``node``."""
    names = {col: col for col in physical_columns(node.columns)}
    if isinstance(node, GroupBy):
        for index, aggregate in enumerate(node.aggregates):
            names[f"{VAR_PREFIX}{aggregate.alias}"] = f"agg{index}"
    return names


class _Emitter:
    def __init__(self, inline_ids: bool) -> None:
        self.inline_ids = inline_ids
        self.aliases = 0

    def _alias(self) -> str:
        alias = f"t{self.aliases}"
        self.aliases += 1
        return alias

    def _term_ref(self, bound: BoundTerm) -> str:
        if self.inline_ids:
            return "NULL" if bound.term_id is None else str(bound.term_id)
        return (
            f"(SELECT id_resource_or_literal FROM {DICTIONARY_TABLE} "
            f"WHERE digest = '{bound.term.digest()}')"
        )

    # --- mergeable blocks --------------------------------------------------------

    def _scan(self, node: Scan) -> _Select:
        alias = self._alias()
        table = QUAD_TABLE if node.source == "quads" else METADATA_TABLE
        block = _Select(from_items=[f"{table} {alias}"])
        positions = dict((var, pos) for pos, var in node.bindings)
        for spec in node.columns:
            if spec.repr is Repr.CONDENSED:
                ng, bs = spec.columns
                block.exprs[ng] = f"{alias}.{QUAD_COLUMNS['g']}"
                block.exprs[bs] = f"{alias}.validity"
            else:
                block.exprs[spec.columns[0]] = f"{alias}.{QUAD_COLUMNS[positions[spec.var]]}"
        if node.source == "quads":
            graph = next(spec for spec in node.columns if spec.repr is Repr.CONDENSED)
            block.guards[graph.columns[1]] = f"bit_count({alias}.validity) <> 0"
        for bound in node.bound:
            block.where.append(f"{alias}.{QUAD_COLUMNS[bound.position]} = {self._term_ref(bound)}")
        for first, second in node.equalities:
            block.where.append(f"{alias}.{QUAD_COLUMNS[first]} = {alias}.{QUAD_COLUMNS[second]}")
        return block

    def _derived(self, node: PlanNode) -> _Select:
        alias = self._alias()
        text = self._query(node)
        names = _output_names(node)
        block = _Select(from_items=[f"(\n{_indent(text)}\n) {alias}"])
        for col in physical_columns(node.columns):
            block.exprs[col] = f"{alias}.{names[col]}"
        return block

    def _side(self, node: PlanNode) -> _Select:
        return self._block(node) if _mergeable(node) else self._derived(node)

    def _block(self, node: PlanNode) -> _Select:
        if isinstance(node, Scan):
            return self._scan(node)
        if isinstance(node, BitJoin):
            return self._join(node)
        raise TypeError(f"{type(node).__name__} does not form a mergeable block")

    def _join(self, node: BitJoin) -> _Select:
        left = self._side(node.left)
        right = self._side(node.right)
        block = _Select(from_items=left.from_items + right.from_items)
        keyed = {f"{GRAPH_PREFIX}{k}" for k in node.graph_keys} | {f"{BITSTRING_PREFIX}{k}" for k in node.graph_keys}
        conditions: List[str] = []
        for key in node.id_keys:
            col = f"{VAR_PREFIX}{key}"
            conditions.append(f"{left.exprs[col]} = {right.exprs[col]}")
        for key in node.graph_keys:
            ng, bs = f"{GRAPH_PREFIX}{key}", f"{BITSTRING_PREFIX}{key}"
            conditions.append(f"{left.exprs[ng]} = {right.exprs[ng]}")
            combined = f"({left.exprs[bs]} & {right.exprs[bs]})"
            block.guards[bs] = f"bit_count({left.exprs[bs]} & {right.exprs[bs]}) <> 0"
            block.exprs[ng] = left.exprs[ng]
            block.exprs[bs] = combined
        for col in physical_columns(node.columns):
            if col in keyed:
                continue
            source = left if col in left.exprs else right
            block.exprs[col] = source.exprs[col]
            if col in source.guards:
                block.guards[col] = source.guards[col]
        block.where = conditions + left.where + right.where
        block.exprs = {col: block.exprs[col] for col in physical_columns(node.columns)}
        return block

    # --- complete statements ---------------------------------------------------

    def _block_text(self, block: _Select, columns: Tuple[str, ...]) -> str:
        items = [_item(block.exprs[col], col) for col in columns]
        return _render(items, block.from_items, list(block.guards.values()) + block.where)

    def _query(self, node: PlanNode) -> str:
        if _mergeable(node):
            return self._block_text(self._block(node), physical_columns(node.columns))
        if isinstance(node, Lower):
            return self._lower(node)
        if isinstance(node, GroupBy):
            return self._group(node)
        if isinstance(node, Finalize):
            return self._finalize(node)
        raise TypeError(f"cannot emit {type(node).__name__}")

    def _lower(self, node: Lower) -> str:
        inner = self._query(node.sub)
        names = _output_names(node.sub)
        ng, bs = f"{GRAPH_PREFIX}{node.var}", f"{BITSTRING_PREFIX}{node.var}"
        items = []
        for col in physical_columns(node.columns):
            if col == f"{VAR_PREFIX}{node.var}":
                items.append(f"vng.id_versioned_named_graph AS {col}")
            else:
                items.append(_item(f"flatten_table.{names[col]}", col))
        from_item = (
            f"(\n{_indent(inner)}\n) flatten_table\n"
            f"JOIN {VNG_TABLE} vng ON flatten_table.{names[ng]} = vng.id_named_graph"
            f" AND get_bit(flatten_table.{names[bs]}, vng.index_version - 1) = 1"
        )
        return _render(items, [from_item], [])

    def _group(self, node: GroupBy) -> str:
        inner = self._query(node.sub)
        names = _output_names(node.sub)
        keys = [names[f"{VAR_PREFIX}{key}"] for key in node.keys]
        popcounts = [f"bit_count({names[f'{BITSTRING_PREFIX}{var}']})" for var in node.multiplicity]
        items = list(keys)
        for index, aggregate in enumerate(node.aggregates):
            if aggregate.function == "COUNT":
                expr = f"SUM({' * '.join(popcounts)})" if popcounts else "COUNT(*)"
                if popcounts and not node.keys:
                    expr = f"COALESCE({expr}, 0)"
            else:
                expr = f"{aggregate.function}({names[f'{VAR_PREFIX}{aggregate.var}']})"
            items.append(f"{expr} AS agg{index}")
        text = _render(items, [f"(\n{_indent(inner)}\n) gp"], [])
        if keys:
            text += f"\nGROUP BY ({', '.join(keys)})"
        return text

    def _finalize(self, node: Finalize) -> str:
        columns = physical_columns(node.columns)
        if _mergeable(node.sub):
            return self._block_text(self._block(node.sub), columns)
        inner = self._query(node.sub)
        names = _output_names(node.sub)
        items = [_item(f"ext.{names[col]}", col) for col in columns]
        return _render(items, [f"(\n{_indent(inner)}\n) ext"], [])


def emit(plan: PlanNode, inline_ids: bool = False) -> SqlFragment:
    """Translate a plan into one SQL statement; identical input gives identical text."""
    emitter = _Emitter(inline_ids)
    text = emitter._query(plan)
    return SqlFragment(text=text, columns=physical_columns(plan.columns), aliases=emitter.aliases)


def emit_sql(plan: PlanNode, inline_ids: bool = False) -> str:
    return emit(plan, inline_ids=inline_ids).text + ";\n"


# --- schema -------------------------------------------------------------------

_POSITION_COLUMN = {"g": "id_named_graph", "s": "id_subject", "p": "id_predicate", "o": "id_object"}


def index_columns(permutation: str) -> str:
    return "(" + ", ".join(_POSITION_COLUMN[pos] for pos in permutation) + ")"


def emit_schema_ddl(version_count: int) -> str:
    """DDL for the five relations, the six quad indexes and the digest index."""
    width = max(version_count, 1)
    statements = [
        f"CREATE TABLE IF NOT EXISTS {DICTIONARY_TABLE} (\n"
        f"{INDENT}id_resource_or_literal BIGINT PRIMARY KEY,\n"
        f"{INDENT}name TEXT NOT NULL,\n"
        f"{INDENT}type TEXT NOT NULL,\n"
        f"{INDENT}datatype TEXT,\n"
        f"{INDENT}lang TEXT,\n"
        f"{INDENT}digest CHAR(64) NOT NULL\n"
        ")",
        f"CREATE TABLE IF NOT EXISTS {VERSION_TABLE} (\n"
        f"{INDENT}index_version INTEGER PRIMARY KEY,\n"
        f"{INDENT}label TEXT\n"
        ")",
        f"CREATE TABLE IF NOT EXISTS {VNG_TABLE} (\n"
        f"{INDENT}id_versioned_named_graph BIGINT PRIMARY KEY,\n"
        f"{INDENT}id_named_graph BIGINT NOT NULL,\n"
        f"{INDENT}index_version INTEGER NOT NULL,\n"
        f"{INDENT}UNIQUE (id_named_graph, index_version)\n"
        ")",
        f"CREATE TABLE IF NOT EXISTS {QUAD_TABLE} (\n"
        f"{INDENT}id_subject BIGINT NOT NULL,\n"
        f"{INDENT}id_predicate BIGINT NOT NULL,\n"
        f"{INDENT}id_object BIGINT NOT NULL,\n"
        f"{INDENT}id_named_graph BIGINT NOT NULL,\n"
        f"{INDENT}validity BIT({width}) NOT NULL\n"
        ")",
        f"CREATE TABLE IF NOT EXISTS {METADATA_TABLE} (\n"
        f"{INDENT}id_subject BIGINT NOT NULL,\n"
        f"{INDENT}id_predicate BIGINT NOT NULL,\n"
        f"{INDENT}id_object BIGINT NOT NULL\n"
        ")",
    ]
    for permutation in INDEX_PERMUTATIONS:
        statements.append(
            f"CREATE INDEX IF NOT EXISTS {QUAD_TABLE}_{permutation} ON {QUAD_TABLE} {index_columns(permutation)}"
        )
    statements.append(f"CREATE INDEX IF NOT EXISTS {DICTIONARY_TABLE}_digest ON {DICTIONARY_TABLE} (digest)")
    return ";\n\n".join(statements) + ";\n"
