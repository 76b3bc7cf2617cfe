"""Run Utilities.

This module provides the shared file-format helpers: canonical hashing,
line-delimited JSON with a header block, delimited tables with comment
headers, and word-list loading.
"""

import hashlib
import json
import logging
from datetime import date
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

import numpy as np
import pandas as pd

from agenda_topics.errors import ConfigurationError, DataError

# Set up logger for this module
logger = logging.getLogger("agenda.utils")

FORMAT_VERSION = 1
FLOAT_FORMAT = "%.10g"

# ===== HASHING =====

def _json_default(value: Any) -> Any:
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, Path):
        return value.as_posix()
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


def canonical_json(payload: Any) -> str:
    """Serialize to sorted-key compact JSON, the form every hash is taken over.

    Sets are written sorted so the result does not depend on hash seeds.
    """
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=_json_default)


def short_hash(payload: Any) -> str:
    """Return the first 12 hex chars of the SHA-256 of the canonical form."""
    text = payload if isinstance(payload, str) else canonical_json(payload)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def file_sha256(path: Path) -> str:
    """Hash a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def make_header(kind: str, run_id: str, config_hash: str, seed: int, **extra: Any) -> dict:
    """Build the header block stamped on every output file."""
    header = {
        "kind": kind,
        "version": FORMAT_VERSION,
        "run_id": run_id,
        "config_hash": config_hash,
        "seed": seed,
    }
    header.update(extra)
    return header

# ===== LINE-DELIMITED JSON =====

def _to_jsonable(value: Any) -> Any:
    if hasattr(value, "model_dump"):
        return value.model_dump(mode="json")
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_jsonl(path: Path, rows: Iterable[Any], header: Mapping[str, Any] | None = None) -> int:
    """Write rows as JSON lines, preceded by an optional ``_header`` line.

    Returns:
        Number of data rows written
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header is not None:
            f.write(canonical_json({"_header": dict(header)}) + "\n")
        for row in rows:
            f.write(canonical_json(_to_jsonable(row)) + "\n")
            n += 1
    logger.debug(f"Wrote {n} rows to {path}")
    return n


def iter_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)`` for each data line, skipping the header."""
    if not path.exists():
        raise ConfigurationError(f"File not found: {path}")
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{line_no}: invalid JSON ({e.msg})") from e
            if isinstance(obj, dict) and "_header" in obj:
                continue
            yield line_no, obj


def read_jsonl_header(path: Path) -> dict:
    """Return the header block of a JSONL file, or an empty dict."""
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    if not first:
        return {}
    obj = json.loads(first)
    return obj.get("_header", {}) if isinstance(obj, dict) else {}

# ===== DELIMITED TABLES =====

def write_table(path: Path, frame: pd.DataFrame, header: Mapping[str, Any], index: bool = False) -> None:
    """Write a CSV preceded by ``# key: value`` header lines."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for key, value in header.items():
            f.write(f"# {key}: {value}\n")
        frame.to_csv(f, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote table {path} with {len(frame)} rows")


def read_table(path: Path) -> pd.DataFrame:
    """Read a CSV written by :func:`write_table`, skipping its header lines."""
    return pd.read_csv(path, skiprows=len(read_table_header(path)))


def read_table_header(path: Path) -> dict[str, str]:
    """Return the ``# key: value`` header lines of a table."""
    header = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            header[key] = value
    return header

# ===== WORD LISTS =====

def read_word_list(path: Path | None) -> set[str]:
    """Read a UTF-8 file with one term per line; blank lines and ``#`` comments ignored."""
    if path is None:
        return set()
    if not path.exists():
        raise ConfigurationError(f"Word list not found: {path}")
    with open(path, encoding="utf-8") as f:
        words = {line.strip() for line in f if line.strip() and not line.startswith("#")}
    logger.info(f"Loaded {len(words)} terms from {path}")
    return words
