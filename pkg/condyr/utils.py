"""Utility functions for condyr."""

from __future__ import annotations

import hashlib
import os
import sys
import tempfile
from pathlib import Path
from typing import Iterator, Optional

from condyr.constants import _LOG_VERBOSE, TRUTHY
from condyr.exceptions import ConfigError


def log(level: str, message: str) -> None:
    """Lightweight structured logging; stdout is reserved for command output."""
    if level == "DEBUG" and not _LOG_VERBOSE:
        return
    colours = {
        "INFO": "\033[0;34m",
        "WARN": "\033[1;33m",
        "ERROR": "\033[0;31m",
        "SUCCESS": "\033[0;32m",
        "DEBUG": "\033[0;90m",
    }
    colour = colours.get(level, "")
    reset = "\033[0m" if colour else ""
    print(f"{colour}[{level}]{reset} {message}", file=sys.stderr, flush=True)


def get_env(name: str, default: Optional[str] = None) -> Optional[str]:
    return os.environ.get(name, default)


def get_env_bool(name: str, default: bool = False) -> bool:
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.lower() in TRUTHY


def parse_int_env(name: str, default: str, min_val: int = 1, max_val: Optional[int] = None) -> int:
    raw = get_env(name, default)
    if raw is None:
        raise ConfigError(f"{name} has no value and no default was provided")
    return parse_int(name, raw, min_val=min_val, max_val=max_val)


def parse_int(name: str, raw: object, min_val: int = 1, max_val: Optional[int] = None) -> int:
    try:
        value = int(str(raw))
    except ValueError:
        raise ConfigError(f"{name} must be an integer (got '{raw}')")
    if value < min_val:
        raise ConfigError(f"{name} must be >= {min_val} (got {value})")
    if max_val is not None and value > max_val:
        raise ConfigError(f"{name} must be <= {max_val} (got {value})")
    return value


def ensure_directory(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)


def atomic_write_bytes(destination: Path, payload: bytes) -> None:
    """Write ``payload`` next to ``destination`` and rename it into place."""
    ensure_directory(destination.parent)
    with tempfile.NamedTemporaryFile(delete=False, dir=destination.parent) as tmp:
        tmp_path = Path(tmp.name)
        try:
            tmp.write(payload)
            tmp.flush()
            os.fsync(tmp.fileno())
        except Exception:
            tmp_path.unlink(missing_ok=True)
            raise
    tmp_path.replace(destination)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# --- N-Quads string escaping -------------------------------------------------

_ESCAPES = {
    "\\": "\\\\",
    '"': '\\"',
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
    "\b": "\\b",
    "\f": "\\f",
}
_UNESCAPES = {
    "\\": "\\",
    '"': '"',
    "'": "'",
    "n": "\n",
    "r": "\r",
    "t": "\t",
    "b": "\b",
    "f": "\f",
}


def escape_text(text: str) -> str:
    """Escape a lexical form the way N-Quads string literals are escaped."""
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def unescape_text(text: str) -> str:
    """Inverse of :func:`escape_text`; also accepts ``\\uXXXX`` and ``\\UXXXXXXXX``."""
    if "\\" not in text:
        return text
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(text):
            raise ValueError("dangling escape at end of text")
        code = text[i + 1]
        if code in _UNESCAPES:
            out.append(_UNESCAPES[code])
            i += 2
        elif code in ("u", "U"):
            width = 4 if code == "u" else 8
            digits = text[i + 2 : i + 2 + width]
            if len(digits) != width:
                raise ValueError(f"truncated \\{code} escape")
            out.append(chr(int(digits, 16)))
            i += 2 + width
        else:
            raise ValueError(f"unknown escape sequence \\{code}")
    return "".join(out)


# --- validity bitstrings -----------------------------------------------------
# A validity is an int whose bit (i - 1) marks presence in version i. The
# printed form puts version 1 leftmost, so growing the version count never
# rewrites existing values.


def version_bit(version_index: int) -> int:
    return 1 << (version_index - 1)


def popcount(bits: int) -> int:
    return bits.bit_count()


def set_versions(bits: int) -> Iterator[int]:
    """Yield the 1-based version indexes whose bit is set, ascending."""
    index = 1
    while bits:
        if bits & 1:
            yield index
        bits >>= 1
        index += 1


def validity_to_text(bits: int, width: int) -> str:
    if bits >> width:
        raise ValueError(f"validity has bits beyond width {width}")
    return "".join("1" if (bits >> i) & 1 else "0" for i in range(width))


def validity_from_text(text: str) -> int:
    bits = 0
    for i, ch in enumerate(text):
        if ch == "1":
            bits |= 1 << i
        elif ch != "0":
            raise ValueError(f"invalid validity character {ch!r}")
    return bits
