"""N-Quads snapshot reading and writing."""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

try:
    import rdflib
    from rdflib import BNode, Dataset, Literal, URIRef
    from rdflib.graph import DATASET_DEFAULT_GRAPH_ID
except ImportError as exc:  # pragma: no cover
    raise SystemExit("rdflib is required but not installed") from exc

from condyr.exceptions import InvalidTermError, NQuadsParseError
from condyr.models import Term
from condyr.utils import atomic_write_bytes, log

TermQuad = Tuple[Term, Term, Term, Term]

# rdflib.NORMALIZE_LITERALS is process-global; hold this while it is flipped.
_PARSE_LOCK = threading.Lock()


def term_from_rdflib(node: object) -> Term:
    if isinstance(node, URIRef):
        return Term.iri(str(node))
    if isinstance(node, BNode):
        return Term.blank(str(node))
    if isinstance(node, Literal):
        datatype = str(node.datatype) if node.datatype is not None else None
        return Term.literal(str(node), datatype=datatype, lang=node.language)
    raise InvalidTermError(f"unsupported RDF node {node!r}")


def _parse_verbatim(dataset: Dataset, **source: str) -> None:
    """Parse N-Quads into ``dataset`` keeping literal lexical forms untouched."""
    with _PARSE_LOCK:
        normalize = rdflib.NORMALIZE_LITERALS
        rdflib.NORMALIZE_LITERALS = False
        try:
            dataset.parse(format="nquads", **source)
        finally:
            rdflib.NORMALIZE_LITERALS = normalize


def _first_bad_line(path: Path) -> Optional[int]:
    """1-based number of the first statement rdflib rejects on its own, if any."""
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except (OSError, UnicodeDecodeError):
        return None
    for number, text in enumerate(lines, start=1):
        stripped = text.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            _parse_verbatim(Dataset(), data=text + "\n")
        except Exception:
            return number
    return None


def read_snapshot(path: Path) -> List[TermQuad]:
    """Parse one N-Quads file into a sorted list of distinct term quads.

    Every statement must name its graph; statements in the default graph
    are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise NQuadsParseError("file not found", path=str(path))
    dataset = Dataset()
    try:
        _parse_verbatim(dataset, source=str(path))
    except Exception as exc:
        message = str(exc).strip() or type(exc).__name__
        raise NQuadsParseError(message, path=str(path), line=_first_bad_line(path))

    quads = set()
    for s, p, o, graph in dataset.quads((None, None, None, None)):
        identifier = getattr(graph, "identifier", graph)
        if identifier is None or identifier == DATASET_DEFAULT_GRAPH_ID:
            raise NQuadsParseError(f"statement {s.n3()} {p.n3()} {o.n3()} has no graph", path=str(path))
        try:
            quads.add((term_from_rdflib(s), term_from_rdflib(p), term_from_rdflib(o), term_from_rdflib(identifier)))
        except InvalidTermError as exc:
            raise NQuadsParseError(str(exc), path=str(path))
    log("DEBUG", f"Parsed {len(quads)} quads from {path}")
    return sorted(quads, key=lambda quad: tuple(term.sort_key() for term in quad))


def format_quad(quad: TermQuad) -> str:
    return " ".join(term.n3() for term in quad) + " ."


def write_snapshot(quads: Iterable[TermQuad], path: Path) -> Path:
    lines = sorted(format_quad(quad) for quad in quads)
    atomic_write_bytes(Path(path), ("\n".join(lines) + "\n" if lines else "").encode("utf-8"))
    return Path(path)
