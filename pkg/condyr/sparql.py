"""Parser for the supported SPARQL subset (PLY lexer + LALR grammar)."""

from __future__ import annotations

import threading
from typing import Dict, List, Optional, Tuple, Union

try:
    from ply import lex, yacc
except ImportError as exc:  # pragma: no cover
    raise SystemExit("ply is required but not installed") from exc

from condyr.algebra import (
    METADATA,
    Aggregate,
    AlgebraNode,
    GraphRef,
    Group,
    Project,
    QuadPattern,
    Var,
    join_all,
    user_variables,
)
from condyr.constants import (
    DEFAULT_METADATA_GRAPH_IRI,
    RDF_TYPE_IRI,
    XSD_BOOLEAN_IRI,
    XSD_DECIMAL_IRI,
    XSD_INTEGER_IRI,
)
from condyr.exceptions import (
    InvalidTermError,
    QuerySyntaxError,
    UndefinedPrefixError,
    UnsupportedFeatureError,
)
from condyr.models import Term, TermKind
from condyr.utils import log, unescape_text

KEYWORDS = {
    "PREFIX": "PREFIX",
    "SELECT": "SELECT",
    "WHERE": "WHERE",
    "GROUP": "GROUP",
    "BY": "BY",
    "AS": "AS",
    "COUNT": "COUNT",
    "MIN": "MIN",
    "MAX": "MAX",
    "GRAPH": "GRAPH",
    "TRUE": "TRUE",
    "FALSE": "FALSE",
}

# Keywords of SPARQL 1.1 with no translation in the condensed algebra.
UNSUPPORTED_KEYWORDS = {
    "FILTER": "FILTER",
    "OPTIONAL": "OPTIONAL",
    "UNION": "UNION",
    "ORDER": "ORDER BY",
    "MINUS": "MINUS",
    "BIND": "BIND",
    "VALUES": "VALUES",
    "SERVICE": "SERVICE",
    "DESCRIBE": "DESCRIBE",
    "CONSTRUCT": "CONSTRUCT",
    "ASK": "ASK",
    "HAVING": "HAVING",
    "LIMIT": "LIMIT",
    "OFFSET": "OFFSET",
    "DISTINCT": "DISTINCT",
    "REDUCED": "REDUCED",
    "FROM": "FROM",
    "NAMED": "NAMED",
    "EXISTS": "EXISTS",
    "NOT": "NOT",
    "BASE": "BASE",
    "SUM": "SUM",
    "AVG": "AVG",
    "SAMPLE": "SAMPLE",
    "GROUP_CONCAT": "GROUP_CONCAT",
}


def position(text: str, lexpos: int) -> Tuple[int, int]:
    """1-based (line, column) of an offset into ``text``."""
    line = text.count("\n", 0, lexpos) + 1
    column = lexpos - (text.rfind("\n", 0, lexpos) + 1) + 1
    return line, column


class _Lexer:
    tokens = (
        "IRIREF",
        "PNAME",
        "VAR",
        "STRING",
        "LANGTAG",
        "DTYPE",
        "DECIMAL",
        "INTEGER",
        "A",
        "LBRACE",
        "RBRACE",
        "LPAREN",
        "RPAREN",
        "DOT",
        "STAR",
    ) + tuple(KEYWORDS.values())

    t_ignore = " \t\r\n"

    # Rules are functions so they are tried in definition order.

    def t_COMMENT(self, t):
        r"\#[^\n]*"

    def t_IRIREF(self, t):
        r"<[^<>\"{}|^`\\\x00-\x20]*>"
        return t

    def t_VAR(self, t):
        r"[?$][A-Za-z0-9_]+"
        return t

    def t_STRING(self, t):
        r"\"(?:[^\"\\\n]|\\.)*\"|'(?:[^'\\\n]|\\.)*'"
        return t

    def t_LANGTAG(self, t):
        r"@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*"
        return t

    def t_DTYPE(self, t):
        r"\^\^"
        return t

    def t_DECIMAL(self, t):
        r"[+-]?[0-9]*\.[0-9]+"
        return t

    def t_INTEGER(self, t):
        r"[+-]?[0-9]+"
        return t

    def t_PATH(self, t):
        r"[/|^+!]"
        self._unsupported("property paths", t)

    def t_BLANK(self, t):
        r"_:[A-Za-z0-9_\-]+|\[\s*\]"
        self._unsupported("blank nodes in queries", t)

    def t_LIST(self, t):
        r"[;,\[\]]"
        self._unsupported("predicate-object lists", t)

    def t_PNAME(self, t):
        r"(?:[A-Za-z][A-Za-z0-9_\-]*(?:\.[A-Za-z0-9_\-]+)*)?:(?:[A-Za-z0-9_\-:%]+(?:\.[A-Za-z0-9_\-:%]+)*)?"
        return t

    def t_NAME(self, t):
        r"[A-Za-z_][A-Za-z0-9_\-]*"
        if t.value == "a":
            t.type = "A"
            return t
        upper = t.value.upper()
        if upper in KEYWORDS:
            t.type = KEYWORDS[upper]
            return t
        if upper in UNSUPPORTED_KEYWORDS:
            self._unsupported(UNSUPPORTED_KEYWORDS[upper], t)
        line, column = position(t.lexer.lexdata, t.lexpos)
        raise QuerySyntaxError(f"unexpected word '{t.value}'", line, column)

    def t_LBRACE(self, t):
        r"\{"
        return t

    def t_RBRACE(self, t):
        r"\}"
        return t

    def t_LPAREN(self, t):
        r"\("
        return t

    def t_RPAREN(self, t):
        r"\)"
        return t

    def t_DOT(self, t):
        r"\."
        return t

    def t_STAR(self, t):
        r"\*"
        return t

    def t_error(self, t):
        line, column = position(t.lexer.lexdata, t.lexpos)
        raise QuerySyntaxError(f"unexpected character {t.value[0]!r}", line, column)

    @staticmethod
    def _unsupported(feature: str, t) -> None:
        line, column = position(t.lexer.lexdata, t.lexpos)
        raise UnsupportedFeatureError(feature, line, column)


# Parse-time shapes handed from grammar actions to the tree builder.
class _Statement:
    __slots__ = ("terms", "graph", "lexpos")

    def __init__(self, terms: List[Union[Term, Var]], graph: Optional[Union[Term, Var]], lexpos: int) -> None:
        self.terms = terms
        self.graph = graph
        self.lexpos = lexpos


class _Grammar:
    tokens = _Lexer.tokens
    start = "query"

    def _context(self, p) -> "_ParseContext":
        return p.lexer.context

    def _syntax(self, p, index: int, message: str) -> QuerySyntaxError:
        line, column = position(p.lexer.lexdata, p.lexpos(index))
        return QuerySyntaxError(message, line, column)

    def p_query_select(self, p):
        "query : prologue select_query"
        p[0] = p[2]

    def p_query_pattern(self, p):
        """query : prologue body
        | prologue LBRACE body RBRACE"""
        p[0] = ("pattern", p[2] if len(p) == 3 else p[3])

    def p_prologue(self, p):
        """prologue : prologue prefix_decl
        | empty"""

    def p_prefix_decl(self, p):
        "prefix_decl : PREFIX PNAME IRIREF"
        prefix, _, local = p[2].partition(":")
        if local:
            raise self._syntax(p, 2, f"prefix declaration '{p[2]}' must end with ':'")
        self._context(p).prefixes[prefix] = p[3][1:-1]

    def p_select_query(self, p):
        "select_query : SELECT projection where_opt LBRACE body RBRACE group_opt"
        p[0] = ("select", p[2], p[5], p[7])

    def p_where_opt(self, p):
        """where_opt : WHERE
        | empty"""

    def p_projection_star(self, p):
        "projection : STAR"
        p[0] = None

    def p_projection_items(self, p):
        "projection : select_items"
        p[0] = p[1]

    def p_select_items(self, p):
        """select_items : select_items select_item
        | select_item"""
        p[0] = p[1] + [p[2]] if len(p) == 3 else [p[1]]

    def p_select_item_var(self, p):
        "select_item : VAR"
        p[0] = p[1][1:]

    def p_select_item_aggregate(self, p):
        "select_item : LPAREN aggregate AS VAR RPAREN"
        function, var = p[2]
        p[0] = Aggregate(function, var, p[4][1:])

    def p_aggregate(self, p):
        """aggregate : COUNT LPAREN VAR RPAREN
        | COUNT LPAREN STAR RPAREN
        | MIN LPAREN VAR RPAREN
        | MAX LPAREN VAR RPAREN"""
        var = None if p[3] == "*" else p[3][1:]
        p[0] = (p[1].upper(), var)

    def p_group_opt(self, p):
        """group_opt : GROUP BY group_vars
        | empty"""
        p[0] = p[3] if len(p) == 4 else []

    def p_group_vars(self, p):
        """group_vars : group_vars VAR
        | VAR"""
        p[0] = p[1] + [p[2][1:]] if len(p) == 3 else [p[1][1:]]

    def p_body_triples(self, p):
        "body : triples_opt"
        p[0] = list(p[1])

    def p_body_graph(self, p):
        "body : body graph_clause dot_opt triples_opt"
        p[0] = p[1] + p[2] + p[4]

    def p_dot_opt(self, p):
        """dot_opt : DOT
        | empty"""

    def p_graph_clause(self, p):
        "graph_clause : GRAPH term LBRACE triples_opt RBRACE"
        graph = p[2]
        if isinstance(graph, Term) and graph.kind is not TermKind.IRI:
            raise self._syntax(p, 2, "GRAPH name must be an IRI or a variable")
        for statement in p[4]:
            if statement.graph is not None:
                raise QuerySyntaxError(
                    "quad patterns cannot appear inside a GRAPH clause",
                    *position(p.lexer.lexdata, statement.lexpos),
                )
            statement.graph = graph
        p[0] = p[4]

    def p_triples_opt(self, p):
        """triples_opt : triples
        | empty"""
        p[0] = p[1] or []

    def p_triples(self, p):
        """triples : stmt
        | stmt DOT
        | stmt DOT triples"""
        p[0] = [p[1]] + (p[3] if len(p) == 4 else [])

    def p_stmt(self, p):
        """stmt : term term term
        | term term term term"""
        graph = p[4] if len(p) == 5 else None
        if isinstance(graph, Term) and graph.kind is not TermKind.IRI:
            raise self._syntax(p, 4, "graph position must be an IRI or a variable")
        p[0] = _Statement([p[1], p[2], p[3]], graph, p.lexpos(1))

    def p_term_var(self, p):
        "term : VAR"
        p[0] = Var(p[1][1:])

    def p_term_iri(self, p):
        "term : iri"
        p[0] = Term.iri(p[1])

    def p_term_literal(self, p):
        "term : literal"
        p[0] = p[1]

    def p_iri(self, p):
        """iri : IRIREF
        | PNAME
        | A"""
        token = p[1]
        if p.slice[1].type == "IRIREF":
            p[0] = token[1:-1]
        elif p.slice[1].type == "A":
            p[0] = RDF_TYPE_IRI
        else:
            prefix, _, local = token.partition(":")
            prefixes = self._context(p).prefixes
            if prefix not in prefixes:
                raise UndefinedPrefixError(prefix, *position(p.lexer.lexdata, p.lexpos(1)))
            p[0] = prefixes[prefix] + local

    def p_literal_string(self, p):
        """literal : STRING
        | STRING LANGTAG
        | STRING DTYPE iri"""
        try:
            lexical = unescape_text(p[1][1:-1])
            if len(p) == 2:
                p[0] = Term.literal(lexical)
            elif len(p) == 3:
                p[0] = Term.literal(lexical, lang=p[2][1:])
            else:
                p[0] = Term.literal(lexical, datatype=p[3])
        except (ValueError, InvalidTermError) as exc:
            raise self._syntax(p, 1, f"invalid literal: {exc}")

    def p_literal_number(self, p):
        """literal : INTEGER
        | DECIMAL"""
        datatype = XSD_INTEGER_IRI if p.slice[1].type == "INTEGER" else XSD_DECIMAL_IRI
        p[0] = Term.literal(p[1], datatype=datatype)

    def p_literal_boolean(self, p):
        """literal : TRUE
        | FALSE"""
        p[0] = Term.literal(p[1].lower(), datatype=XSD_BOOLEAN_IRI)

    def p_empty(self, p):
        "empty :"

    def p_error(self, t):
        if t is None:
            raise QuerySyntaxError("unexpected end of query", *_end_position())
        line, column = position(t.lexer.lexdata, t.lexpos)
        raise QuerySyntaxError(f"unexpected '{t.value}'", line, column)


class _ParseContext:
    def __init__(self) -> None:
        self.prefixes: Dict[str, str] = {}


_state = threading.local()


def _end_position() -> Tuple[int, int]:
    text = getattr(_state, "text", "")
    return position(text, len(text))


_LEXER = lex.lex(module=_Lexer())
_PARSER = yacc.yacc(module=_Grammar(), debug=False, write_tables=False, errorlog=yacc.NullLogger())
_PARSE_LOCK = threading.Lock()


def _fresh_lexer(text: str):
    lexer = _LEXER.clone()
    lexer.context = _ParseContext()
    lexer.input(text)
    return lexer


def _parse_raw(text: str):
    lexer = _fresh_lexer(text)
    with _PARSE_LOCK:
        _state.text = text
        return _PARSER.parse(text, lexer=lexer, tracking=True)


def _implicit_graph_name(raw) -> str:
    names = set()
    statements = raw[1] if raw[0] == "pattern" else raw[2]
    for statement in statements:
        for term in statement.terms + [statement.graph]:
            if isinstance(term, Var):
                names.add(term.name)
    if raw[0] == "select":
        for item in raw[1] or []:
            if isinstance(item, Aggregate):
                names.add(item.alias)
                if item.var:
                    names.add(item.var)
            else:
                names.add(item)
        names.update(raw[3])
    name = "_g"
    while name in names:
        name = "_" + name
    return name


def _graph_ref(graph: Union[Term, Var], metadata_graph: str) -> GraphRef:
    if isinstance(graph, Term) and graph.lexical == metadata_graph:
        return METADATA
    return graph


def _build(raw, metadata_graph: str) -> AlgebraNode:
    statements: List[_Statement] = raw[1] if raw[0] == "pattern" else raw[2]
    if not statements:
        raise UnsupportedFeatureError("empty group pattern")
    implicit = Var(_implicit_graph_name(raw))
    patterns = []
    for statement in statements:
        s, p, o = statement.terms
        if statement.graph is None:
            patterns.append(QuadPattern(s, p, o, implicit, implicit_graph=True))
        else:
            patterns.append(QuadPattern(s, p, o, _graph_ref(statement.graph, metadata_graph)))
    tree = join_all(patterns)
    if raw[0] == "pattern":
        return tree

    _, items, _, group_vars = raw
    aggregates = tuple(item for item in (items or []) if isinstance(item, Aggregate))
    if group_vars or aggregates:
        if items is None:
            raise QuerySyntaxError("SELECT * cannot be combined with GROUP BY or aggregates", 1, 1)
        tree = Group(tree, tuple(group_vars), aggregates)
    if items is None:
        names = tuple(user_variables(tree))
    else:
        names = tuple(item.alias if isinstance(item, Aggregate) else item for item in items)
    if len(set(names)) != len(names):
        raise QuerySyntaxError("a variable is projected more than once", 1, 1)
    scope = {v.name for p in patterns for v in (p.s, p.p, p.o, p.g) if isinstance(v, Var)}
    for aggregate in aggregates:
        if aggregate.alias in scope:
            raise QuerySyntaxError(f"aggregate alias ?{aggregate.alias} is already bound", 1, 1)
    return Project(tree, names)


def parse(text: str, metadata_graph: str = DEFAULT_METADATA_GRAPH_IRI) -> AlgebraNode:
    """Parse query text into an algebra tree.

    Raises :class:`QuerySyntaxError` or :class:`UnsupportedFeatureError`
    (and :class:`UndefinedPrefixError` for prefixed names without a
    declaration).
    """
    raw = _parse_raw(text)
    node = _build(raw, metadata_graph)
    log("DEBUG", f"Parsed query into {type(node).__name__}")
    return node


def expand_prefixes(text: str) -> str:
    """Replace prefixed names by absolute IRIs and drop the PREFIX declarations."""
    lexer = _fresh_lexer(text)
    tokens = list(iter(lexer.token, None))
    prefixes: Dict[str, str] = {}
    edits: List[Tuple[int, int, str]] = []
    index = 0
    while index < len(tokens):
        token = tokens[index]
        if token.type == "PREFIX":
            window = tokens[index + 1 : index + 3]
            if [t.type for t in window] != ["PNAME", "IRIREF"] or not window[0].value.endswith(":"):
                raise QuerySyntaxError("malformed PREFIX declaration", *position(text, token.lexpos))
            prefixes[window[0].value[:-1]] = window[1].value[1:-1]
            end = window[1].lexpos + len(window[1].value)
            while end < len(text) and text[end] in " \t\r":
                end += 1
            if end < len(text) and text[end] == "\n":
                end += 1
            edits.append((token.lexpos, end, ""))
            index += 3
            continue
        if token.type == "PNAME":
            prefix, _, local = token.value.partition(":")
            if prefix not in prefixes:
                raise UndefinedPrefixError(prefix, *position(text, token.lexpos))
            edits.append((token.lexpos, token.lexpos + len(token.value), f"<{prefixes[prefix]}{local}>"))
        index += 1
    if not edits:
        return text
    pieces = []
    cursor = 0
    for start, end, replacement in edits:
        pieces.append(text[cursor:start])
        pieces.append(replacement)
        cursor = end
    pieces.append(text[cursor:])
    return "".join(pieces)
