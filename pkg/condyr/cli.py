"""CLI entry points for condyr."""

from __future__ import annotations

import argparse
import dataclasses
import json
import operator
import random
import statistics
import sys
import time
from collections import Counter
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

from condyr.algebra import AlgebraNode, Group, Project, to_sparql
from condyr.config import apply_overrides, load_config
from condyr.constants import OUTPUT_FORMATS, QUERY_MODES
from condyr.exceptions import ConfigError, CondyrError, InvariantViolation, StoreFormatError
from condyr.executor import BITSTRING, Executor, render_table, solutions
from condyr.models import Config, ScanCounters, StoreStats
from condyr.nquads import format_quad, read_snapshot
from condyr.oracle import FlatStore, evaluate, materialize_flat
from condyr.planner import explain, plan_query
from condyr.sample import GOLDEN_QUERIES, build_sample_store, run_golden
from condyr.sparql import parse
from condyr.sql import emit_schema_ddl, emit_sql
from condyr.store import StoreSnapshot, TermQuad, VersionedQuadStore
from condyr.utils import log
from condyr.workload import build_store, generate_snapshots, random_query

Combine = Callable[[int, int], int]


def _stats_line(stats: StoreStats) -> str:
    return (
        f"V={stats.version_count}, quads={stats.quad_count}, flat_rows={stats.flat_row_count}, "
        f"terms={stats.term_count}, vngs={stats.vng_count}"
    )


def _open_store(cfg: Config) -> VersionedQuadStore:
    if not cfg.store_path.exists():
        raise StoreFormatError(f"Store {cfg.store_path} does not exist; build it with 'condyr load'")
    store = VersionedQuadStore.load(cfg.store_path)
    store.allow_empty_snapshot = cfg.allow_empty_snapshot
    return store


def _read_query(source: Optional[str], text: Optional[str]) -> str:
    if text is not None:
        return text
    if source is None:
        raise ConfigError("No query given: pass a query file, '-' for stdin, or --text")
    if source == "-":
        return sys.stdin.read()
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"Query file not found: {path}")
    return path.read_text(encoding="utf-8")


# --- load / stats / label / export / ddl -----------------------------------------


def cmd_load(cfg: Config, files: List[Path], append: bool = False) -> int:
    """Ingest N-Quads files in argument order as successive versions and save the store."""
    if not files:
        raise ConfigError("load needs at least one N-Quads file (one file per version)")
    if append and cfg.store_path.exists():
        store = _open_store(cfg)
    else:
        store = VersionedQuadStore(allow_empty_snapshot=cfg.allow_empty_snapshot)
    loaded = []
    for path in files:
        quads = read_snapshot(path)
        version = store.ingest_version(quads, label=Path(path).stem)
        loaded.append({"version": version, "file": str(path), "quads": len(quads)})
    store.save(cfg.store_path)
    stats = store.stats()
    if cfg.output_format == "json":
        print(json.dumps({"versions": loaded, "stats": dataclasses.asdict(stats)}))
    else:
        for entry in loaded:
            print(f"version {entry['version']}: {entry['file']} ({entry['quads']} quads)")
        print(_stats_line(stats))
    return 0


def cmd_stats(cfg: Config) -> int:
    snapshot = _open_store(cfg).snapshot()
    stats = snapshot.stats()
    labels = [snapshot.version_label(index) for index in range(1, snapshot.version_count + 1)]
    if cfg.output_format == "json":
        print(json.dumps({**dataclasses.asdict(stats), "labels": labels}))
    else:
        print(_stats_line(stats))
        for index, label in enumerate(labels, start=1):
            print(f"version {index}: {label or '-'}")
    return 0


def cmd_label(cfg: Config, version: int, label: str) -> int:
    store = _open_store(cfg)
    try:
        store.label_version(version, label)
    except IndexError as exc:
        raise ConfigError(str(exc))
    store.save(cfg.store_path)
    return 0


def cmd_export(cfg: Config, directory: Path) -> int:
    for path in _open_store(cfg).export_csv(directory):
        print(path)
    return 0


def cmd_ddl(cfg: Config, versions: Optional[int] = None) -> int:
    if versions is None:
        versions = _open_store(cfg).version_count if cfg.store_path.exists() else 1
    print(emit_schema_ddl(versions), end="")
    return 0


# --- query ------------------------------------------------------------------------


def cmd_query(cfg: Config, text: str, mode: str = "execute") -> int:
    """Run, translate or explain one query against the store."""
    if mode not in QUERY_MODES:
        raise ConfigError(f"Invalid mode '{mode}'. Supported: {', '.join(sorted(QUERY_MODES))}")
    snapshot = _open_store(cfg).snapshot()
    plan = plan_query(parse(text, metadata_graph=cfg.metadata_graph), snapshot)
    if mode == "explain":
        print(explain(plan))
    elif mode == "sql":
        print(emit_sql(plan, inline_ids=cfg.inline_ids), end="")
    else:
        table = Executor(snapshot).execute(plan)
        print(render_table(table, snapshot.dictionary, cfg.output_format, cfg.stable_sort), end="")
    return 0


# --- bench ------------------------------------------------------------------------


class BenchResult(NamedTuple):
    name: str
    rows: int
    runs: int
    mean_ms: float
    median_ms: float
    min_ms: float
    max_ms: float
    scanned_condensed: int
    scanned_flat: int
    and_ops: int


def bench_query(
    snapshot: StoreSnapshot,
    name: str,
    text: str,
    repetitions: int,
    warmup: int,
    metadata_graph: str,
    flat: Optional[FlatStore] = None,
) -> BenchResult:
    """Time execution (planning excluded) and count the rows each evaluation strategy touches."""
    node = parse(text, metadata_graph=metadata_graph)
    plan = plan_query(node, snapshot)
    timings: List[float] = []
    rows = 0
    for run in range(repetitions):
        start = time.perf_counter()
        table = Executor(snapshot).execute(plan)
        elapsed = (time.perf_counter() - start) * 1000.0
        rows = len(table)
        if run >= warmup:
            timings.append(elapsed)
    condensed = ScanCounters()
    Executor(snapshot, condensed).execute(plan)
    flat_counters = ScanCounters()
    evaluate(node, flat if flat is not None else materialize_flat(snapshot), flat_counters)
    return BenchResult(
        name=name,
        rows=rows,
        runs=len(timings),
        mean_ms=statistics.fmean(timings),
        median_ms=statistics.median(timings),
        min_ms=min(timings),
        max_ms=max(timings),
        scanned_condensed=condensed.rows_scanned,
        scanned_flat=flat_counters.rows_scanned,
        and_ops=condensed.and_ops,
    )


def _collect_queries(paths: List[Path]) -> List[Tuple[str, str]]:
    queries: List[Tuple[str, str]] = []
    for path in paths:
        if path.is_dir():
            for child in sorted(path.glob("*.rq")):
                queries.append((child.name, child.read_text(encoding="utf-8")))
        elif path.is_file():
            queries.append((path.name, path.read_text(encoding="utf-8")))
        else:
            raise ConfigError(f"Query path not found: {path}")
    return queries


def cmd_bench(
    cfg: Config,
    paths: List[Path],
    generate: bool = False,
    versions: int = 10,
    quads: int = 200,
    graphs: int = 3,
    overlap: float = 0.8,
    seed: int = 0,
) -> int:
    if cfg.repetitions <= cfg.warmup:
        raise ConfigError(f"--reps ({cfg.repetitions}) must exceed --warmup ({cfg.warmup})")
    if generate:
        log("INFO", f"Generating {versions} versions x {quads} quads, {graphs} graphs, overlap {overlap}")
        try:
            snapshots = generate_snapshots(random.Random(seed), versions, quads, graphs, overlap)
        except ValueError as exc:
            raise ConfigError(str(exc))
        snapshot = build_store(snapshots).snapshot()
    else:
        snapshot = _open_store(cfg).snapshot()
    queries = _collect_queries(paths) or [(query.name, query.text) for query in GOLDEN_QUERIES]
    flat = materialize_flat(snapshot)

    results: List[BenchResult] = []
    failed = 0
    for name, text in queries:
        try:
            result = bench_query(snapshot, name, text, cfg.repetitions, cfg.warmup, cfg.metadata_graph, flat)
        except CondyrError as exc:
            log("ERROR", f"{name}: {exc}")
            failed += 1
            continue
        log("INFO", f"{name}: mean {result.mean_ms:.3f} ms over {result.runs} runs")
        results.append(result)

    if cfg.output_format == "json":
        for result in results:
            print(json.dumps(result._asdict()))
    else:
        print("\t".join(BenchResult._fields))
        for result in results:
            print("\t".join(f"{value:.3f}" if isinstance(value, float) else str(value) for value in result))
    return 1 if failed else 0


# --- selftest ---------------------------------------------------------------------


def _aggregate_aliases(node: AlgebraNode) -> List[str]:
    inner = node.sub if isinstance(node, Project) else node
    return [agg.alias for agg in inner.aggregates if agg.function == "COUNT"] if isinstance(inner, Group) else []


def _describe_bag(bag: Counter, snapshot: StoreSnapshot, numeric: List[str]) -> List[str]:
    lines = []
    for binding, count in sorted(bag.items(), key=repr):
        cells = [
            f"?{var}={value if var in numeric or value is None else snapshot.dictionary.resolve(value).n3()}"
            for var, value in binding
        ]
        lines.append(f"  {' '.join(cells) or '()'} x{count}")
    return lines or ["  (empty)"]


def counterexample(
    snapshots: Sequence[Sequence[TermQuad]],
    snapshot: StoreSnapshot,
    node: AlgebraNode,
    expected: Counter,
    got: Optional[Counter],
    reason: str,
) -> str:
    lines = [f"Counterexample: {reason}", "query:"]
    lines.extend("  " + line for line in to_sparql(node).splitlines())
    for index, quads in enumerate(snapshots, start=1):
        lines.append(f"version {index}:")
        lines.extend("  " + format_quad(quad) for quad in quads)
    numeric = _aggregate_aliases(node)
    lines.append("expected (flat evaluation):")
    lines.extend(_describe_bag(expected, snapshot, numeric))
    lines.append("got (condensed execution):")
    lines.extend(_describe_bag(got, snapshot, numeric) if got is not None else ["  (no result)"])
    return "\n".join(lines)


def oracle_round(rng: random.Random, combine: Combine = operator.and_) -> Optional[str]:
    """One random store and query; returns a counterexample dump when the engines disagree."""
    snapshots = generate_snapshots(
        rng,
        versions=rng.randint(1, 5),
        quads=rng.randint(1, 12),
        graphs=rng.randint(1, 4),
        overlap=rng.random(),
        persons=4,
    )
    snapshot = build_store(snapshots).snapshot()
    node = random_query(rng, snapshot)
    expected = evaluate(node, materialize_flat(snapshot))
    table = Executor(snapshot, combine=combine).execute(plan_query(node, snapshot))
    bit_columns = [index for index, col in enumerate(table.columns) if col.kind == BITSTRING]
    if any(row[index] == 0 for row in table.rows for index in bit_columns):
        return counterexample(snapshots, snapshot, node, expected, None, "a condensed row has an empty validity")
    try:
        got = solutions(table, snapshot)
    except InvariantViolation as exc:
        return counterexample(snapshots, snapshot, node, expected, None, str(exc))
    if got != expected:
        return counterexample(snapshots, snapshot, node, expected, got, "flattened results differ")
    return None


def _backend_failures(cfg: Config) -> List[str]:
    from condyr.postgres import PostgresBackend, compare_plan

    snapshot = build_sample_store().snapshot()
    failures = []
    with PostgresBackend(cfg.pg_url) as backend:
        backend.load(snapshot)
        for query in GOLDEN_QUERIES:
            plan = plan_query(parse(query.text), snapshot)
            difference = compare_plan(backend, plan, snapshot, inline_ids=cfg.inline_ids)
            if difference:
                failures.append(f"{query.name} on PostgreSQL: {difference}")
    return failures


def cmd_selftest(cfg: Config, rounds: Optional[int] = None, seed: int = 0, inject_fault: bool = False) -> int:
    """Golden suite, randomized oracle rounds and, when configured, the PostgreSQL comparison."""
    combine: Combine = operator.or_ if inject_fault else operator.and_
    if inject_fault:
        log("WARN", "Fault injection: joins combine validities with OR")
    rounds = cfg.selftest_rounds if rounds is None else rounds

    failures = [f"golden: {message}" for message in run_golden(combine)]
    log("INFO" if not failures else "ERROR", f"Golden suite: {len(GOLDEN_QUERIES)} queries, {len(failures)} failures")

    rng = random.Random(seed)
    start = time.perf_counter()
    for index in range(rounds):
        dump = oracle_round(rng, combine)
        if dump is not None:
            print(f"round {index + 1} (seed {seed})")
            print(dump)
            failures.append(f"oracle round {index + 1}")
            break
    log("INFO", f"Oracle rounds: {rounds} in {time.perf_counter() - start:.2f} s")

    if cfg.pg_url:
        failures.extend(_backend_failures(cfg))
    else:
        log("DEBUG", "PostgreSQL comparison skipped (CONDYR_PG_URL not set)")

    for failure in failures:
        log("ERROR", failure)
    if failures:
        log("ERROR", f"Selftest failed ({len(failures)} failures)")
        return 2
    log("SUCCESS", "Selftest passed")
    return 0


# --- argument parsing --------------------------------------------------------------


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML configuration file (default: ./condyr.yaml)")
    common.add_argument("--store", type=Path, help="Store archive path")
    common.add_argument("--metadata-graph", help="IRI of the reserved metadata graph")
    common.add_argument("--inline-ids", action="store_true", default=None, help="Inline term ids in emitted SQL")
    common.add_argument("--format", choices=sorted(OUTPUT_FORMATS), help="Output format")
    common.add_argument("--sort", action="store_true", default=None, help="Sort result rows")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="condyr", description="Condensed versioned quad store")
    sub = parser.add_subparsers(dest="command", required=True)

    load = sub.add_parser("load", parents=[common], help="Build a store from one N-Quads file per version")
    load.add_argument("files", nargs="*", type=Path)
    load.add_argument("--append", action="store_true", help="Add versions to an existing store")

    query = sub.add_parser("query", parents=[common], help="Execute, translate or explain a query")
    query.add_argument("query", nargs="?", help="Query file, or '-' for stdin")
    query.add_argument("-e", "--text", help="Query text")
    query.add_argument("--mode", choices=sorted(QUERY_MODES), default="execute")

    sub.add_parser("stats", parents=[common], help="Show store statistics")

    bench = sub.add_parser("bench", parents=[common], help="Time queries and compare scanned rows")
    bench.add_argument("queries", nargs="*", type=Path, help="Query files or directories of .rq files")
    bench.add_argument("--reps", type=int, help="Runs per query, warm-up included")
    bench.add_argument("--warmup", type=int, help="Runs excluded from the timings")
    bench.add_argument("--generate", action="store_true", help="Benchmark a generated dataset instead of the store")
    bench.add_argument("--versions", type=int, default=10)
    bench.add_argument("--quads", type=int, default=200, help="Quads per generated version")
    bench.add_argument("--graphs", type=int, default=3)
    bench.add_argument("--overlap", type=float, default=0.8, help="Fraction of quads carried into the next version")
    bench.add_argument("--seed", type=int, default=0)

    selftest = sub.add_parser("selftest", parents=[common], help="Golden suite plus randomized oracle rounds")
    selftest.add_argument("--rounds", type=int, help="Randomized rounds")
    selftest.add_argument("--seed", type=int, default=0)
    selftest.add_argument("--inject-fault", action="store_true", help="Combine join validities with OR")

    ddl = sub.add_parser("ddl", parents=[common], help="Print the relational schema")
    ddl.add_argument("--versions", type=int, help="Validity width (default: the store's version count)")

    export = sub.add_parser("export", parents=[common], help="Write one CSV file per relation")
    export.add_argument("directory", type=Path)

    label = sub.add_parser("label", parents=[common], help="Set the label of a version")
    label.add_argument("version", type=int)
    label.add_argument("label")
    return parser


def resolve_config(args: argparse.Namespace) -> Config:
    cfg = load_config(args.config)
    return apply_overrides(
        cfg,
        store_path=args.store,
        metadata_graph=args.metadata_graph,
        inline_ids=args.inline_ids,
        output_format=args.format,
        stable_sort=args.sort,
        repetitions=getattr(args, "reps", None),
        warmup=getattr(args, "warmup", None),
    )


def _dispatch(args: argparse.Namespace, cfg: Config) -> int:
    if args.command == "load":
        return cmd_load(cfg, args.files, append=args.append)
    if args.command == "query":
        return cmd_query(cfg, _read_query(args.query, args.text), mode=args.mode)
    if args.command == "stats":
        return cmd_stats(cfg)
    if args.command == "bench":
        return cmd_bench(
            cfg,
            args.queries,
            generate=args.generate,
            versions=args.versions,
            quads=args.quads,
            graphs=args.graphs,
            overlap=args.overlap,
            seed=args.seed,
        )
    if args.command == "selftest":
        return cmd_selftest(cfg, rounds=args.rounds, seed=args.seed, inject_fault=args.inject_fault)
    if args.command == "ddl":
        return cmd_ddl(cfg, versions=args.versions)
    if args.command == "export":
        return cmd_export(cfg, args.directory)
    return cmd_label(cfg, args.version, args.label)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _dispatch(args, cfg)
    except InvariantViolation as exc:
        log("ERROR", f"Internal invariant violated: {exc}")
        return 2
    except CondyrError as exc:
        log("ERROR", str(exc))
        return 1
    except Exception as exc:
        log("ERROR", f"Unexpected error: {exc}")
        log("ERROR", "This is likely a bug. Please report it with the command line that triggered it.")
        import traceback

        traceback.print_exc()
        return 2
