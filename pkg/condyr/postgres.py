"""Optional live PostgreSQL backend: schema, bulk load and emitted-SQL comparison."""

from __future__ import annotations

import io
from collections import Counter
from decimal import Decimal
from typing import Any, List, Optional, Sequence

from condyr.constants import DICTIONARY_TABLE, METADATA_TABLE, QUAD_TABLE, VERSION_TABLE, VNG_TABLE
from condyr.exceptions import BackendError
from condyr.executor import BITSTRING, Executor, ResultTable
from condyr.planner import PlanNode
from condyr.sql import emit, emit_schema_ddl
from condyr.store import StoreSnapshot, export_tables
from condyr.utils import log, validity_to_text

# Load order; dropped in reverse.
_TABLES = (DICTIONARY_TABLE, VERSION_TABLE, VNG_TABLE, QUAD_TABLE, METADATA_TABLE)

# Optional columns; the CSV export writes their missing values as "".
_NULLABLE = {DICTIONARY_TABLE: ("datatype", "lang"), VERSION_TABLE: ("label",)}


def _psycopg2():
    try:
        import psycopg2  # type: ignore
    except ImportError as exc:
        raise BackendError("psycopg2 is required for the PostgreSQL backend (pip install condyr[postgres])") from exc
    return psycopg2


def _normalize(value: Any) -> Any:
    if isinstance(value, Decimal):
        return int(value)
    return value


def table_rows(table: ResultTable) -> Counter:
    """Executor rows in the shape PostgreSQL returns them: ints, and bit strings as text."""
    kinds = [col.kind for col in table.columns]
    bag: Counter = Counter()
    for row in table.rows:
        bag[
            tuple(
                validity_to_text(value, table.width) if kind == BITSTRING and value is not None else value
                for kind, value in zip(kinds, row)
            )
        ] += 1
    return bag


class PostgresBackend:
    """Connection wrapper for the relational layout the SQL emitter targets."""

    def __init__(self, url: str) -> None:
        self.url = url
        self._conn = None

    def __enter__(self) -> "PostgresBackend":
        self.connect()
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def connect(self) -> None:
        if self._conn is not None:
            return
        psycopg2 = _psycopg2()
        try:
            self._conn = psycopg2.connect(self.url)
        except psycopg2.Error as exc:
            raise BackendError(f"Cannot connect to PostgreSQL: {exc}".strip()) from exc
        log("DEBUG", "Connected to PostgreSQL")

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None

    @property
    def connection(self):
        if self._conn is None:
            raise BackendError("PostgreSQL backend is not connected")
        return self._conn

    def execute(self, sql: str, params: Optional[Sequence[Any]] = None) -> List[tuple]:
        psycopg2 = _psycopg2()
        conn = self.connection
        try:
            with conn.cursor() as cursor:
                cursor.execute(sql, params)
                rows = cursor.fetchall() if cursor.description is not None else []
            conn.commit()
        except psycopg2.Error as exc:
            conn.rollback()
            raise BackendError(f"PostgreSQL rejected statement: {exc}".strip()) from exc
        return [tuple(_normalize(value) for value in row) for row in rows]

    def apply_schema(self, version_count: int) -> None:
        self.execute(emit_schema_ddl(version_count))

    def drop_schema(self) -> None:
        self.execute("".join(f"DROP TABLE IF EXISTS {table};\n" for table in reversed(_TABLES)))

    def load(self, snapshot: StoreSnapshot) -> None:
        """Recreate the schema for ``snapshot`` and bulk-load every relation with COPY."""
        psycopg2 = _psycopg2()
        self.drop_schema()
        self.apply_schema(snapshot.version_count)
        tables = export_tables(snapshot)
        conn = self.connection
        try:
            with conn.cursor() as cursor:
                for table in _TABLES:
                    content = tables[table]
                    header = content.split("\n", 1)[0].replace('"', "")
                    options = "FORMAT csv, HEADER true"
                    if table in _NULLABLE:
                        options += f", FORCE_NULL ({', '.join(_NULLABLE[table])})"
                    cursor.copy_expert(
                        f"COPY {table} ({header}) FROM STDIN WITH ({options})",
                        io.StringIO(content),
                    )
            conn.commit()
        except psycopg2.Error as exc:
            conn.rollback()
            raise BackendError(f"Bulk load failed: {exc}".strip()) from exc
        log("SUCCESS", f"Loaded {len(_TABLES)} relations into PostgreSQL")

    def run_plan(self, plan: PlanNode, inline_ids: bool = False) -> Counter:
        return Counter(self.execute(emit(plan, inline_ids=inline_ids).text))


def compare_plan(
    backend: PostgresBackend, plan: PlanNode, snapshot: StoreSnapshot, inline_ids: bool = False
) -> Optional[str]:
    """Run ``plan`` on both engines; returns a description of the difference, or None."""
    expected = table_rows(Executor(snapshot).execute(plan))
    got = backend.run_plan(plan, inline_ids=inline_ids)
    if got == expected:
        return None
    missing = sorted((expected - got).elements(), key=repr)
    extra = sorted((got - expected).elements(), key=repr)
    return f"missing from backend: {missing}; extra in backend: {extra}"
