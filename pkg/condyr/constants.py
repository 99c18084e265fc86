"""Global constants and defaults for condyr."""

from __future__ import annotations

import os
import re
from pathlib import Path

DEFAULT_CONFIG_PATH = Path("condyr.yaml")
DEFAULT_STORE_PATH = Path("store.condyr")

TRUTHY = {"1", "true", "yes", "on"}
_LOG_VERBOSE = os.environ.get("LOG_VERBOSE", "").lower() in TRUTHY

# Store archive layout version; bumped on any incompatible change.
STORE_FORMAT = "condyr-store"
STORE_FORMAT_VERSION = 1

# Vocabulary written into the metadata relation. The defaults are the
# names used in the sample queries, so those run verbatim.
DEFAULT_IN_VERSION_IRI = "v:in-version"
DEFAULT_VERSION_OF_IRI = "v:version-of"
DEFAULT_VNG_PREFIX = "urn:condyr:vng"
DEFAULT_METADATA_GRAPH_IRI = "ng:Metadata"

RDF_TYPE_IRI = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD_INTEGER_IRI = "http://www.w3.org/2001/XMLSchema#integer"
XSD_DECIMAL_IRI = "http://www.w3.org/2001/XMLSchema#decimal"
XSD_BOOLEAN_IRI = "http://www.w3.org/2001/XMLSchema#boolean"

# Column name prefixes of the condensed algebra.
VAR_PREFIX = "v$"
GRAPH_PREFIX = "ng$"
BITSTRING_PREFIX = "bs$"

# Relational model (table name -> columns), in DDL order.
QUAD_TABLE = "versioned_quad"
DICTIONARY_TABLE = "resource_or_literal"
VERSION_TABLE = "version"
VNG_TABLE = "versioned_named_graph"
METADATA_TABLE = "metadata"

QUAD_POSITIONS = ("s", "p", "o", "g")
QUAD_COLUMNS = {
    "s": "id_subject",
    "p": "id_predicate",
    "o": "id_object",
    "g": "id_named_graph",
}

# Composite index orders over (g, s, p, o); every order leads with the graph.
INDEX_PERMUTATIONS = ("gspo", "gsop", "gpos", "gpso", "gops", "gosp")

OUTPUT_FORMATS = {"tsv", "json"}
QUERY_MODES = {"execute", "sql", "explain"}

DEFAULT_REPETITIONS = 200
DEFAULT_WARMUP = 50
DEFAULT_SELFTEST_ROUNDS = 100

PG_URL_ENV = "CONDYR_PG_URL"

LANG_TAG_RE = re.compile(r"^[a-zA-Z]+(-[a-zA-Z0-9]+)*$")
