"""Persistence for token documents, vocabularies and model states."""

import json
import logging
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from pydantic import ValidationError

from agenda_topics.errors import ConfigurationError, DataError, InvariantViolation
from agenda_topics.model_state import ModelState
from agenda_topics.state_model import ModelParams
from agenda_topics.state_text import TokenDocument, VocabularyIndex
from agenda_topics.utils import canonical_json, iter_jsonl, read_jsonl_header, short_hash, write_jsonl

# Set up logger for this module
logger = logging.getLogger("agenda.persistence")

STATE_FORMAT = "agenda-topics/model-state"
STATE_VERSION = 1

# ===== DOCUMENTS AND VOCABULARY =====

def vocabulary_hash(vocabulary: VocabularyIndex) -> str:
    """Hash of the ordered term list."""
    return short_hash(vocabulary.terms)


def write_documents(path: Path, documents: list[TokenDocument], header: Mapping[str, Any]) -> None:
    """Write token documents as JSON lines."""
    write_jsonl(path, documents, header=header)


def read_documents(path: Path) -> list[TokenDocument]:
    """Read token documents written by :func:`write_documents`."""
    documents = []
    for line_no, obj in iter_jsonl(path):
        try:
            documents.append(TokenDocument.model_validate(obj))
        except ValidationError as e:
            raise DataError(f"{path}:{line_no}: invalid token document ({e.errors()[0]['msg']})") from e
    return documents


def write_vocabulary(path: Path, vocabulary: VocabularyIndex, header: Mapping[str, Any]) -> None:
    """Write the vocabulary as ``{"id", "term", "df"}`` lines."""
    rows = (
        {"id": i, "term": term, "df": df}
        for i, (term, df) in enumerate(zip(vocabulary.terms, vocabulary.doc_frequency or [0] * vocabulary.size))
    )
    write_jsonl(path, rows, header={**header, "vocab_hash": vocabulary_hash(vocabulary), "V": vocabulary.size})


def read_vocabulary(path: Path) -> VocabularyIndex:
    """Read a vocabulary file, checking ids are dense and in order."""
    terms, dfs = [], []
    for line_no, obj in iter_jsonl(path):
        if obj.get("id") != len(terms):
            raise DataError(f"{path}:{line_no}: vocabulary ids must be dense and ordered")
        terms.append(obj["term"])
        dfs.append(int(obj.get("df", 0)))
    return VocabularyIndex(terms=terms, doc_frequency=dfs)


def read_header(path: Path) -> dict:
    """Header block of a JSONL output."""
    if not path.exists():
        raise ConfigurationError(f"File not found: {path}")
    return read_jsonl_header(path)

# ===== MODEL STATE =====

def state_to_dict(state: ModelState, rng: np.random.Generator | None, vocab_hash: str, header: Mapping[str, Any]) -> dict:
    """Serialize a state with its count tables, assignments and RNG position."""
    topics = []
    for topic in state.topics:
        topics.append({
            "topic_id": topic.topic_id,
            "is_seed": topic.is_seed,
            "doc_count": topic.doc_count,
            "per_corpus_doc_count": topic.per_corpus_doc_count,
            "term_counts_labeled": {str(t): n for t, n in sorted(topic.term_counts_labeled.items())},
            "term_counts_unlabeled": {str(t): n for t, n in sorted(topic.term_counts_unlabeled.items())},
        })
    return {
        "format": STATE_FORMAT,
        "version": STATE_VERSION,
        "header": dict(header),
        "params": state.params.model_dump(mode="json"),
        "vocab_hash": vocab_hash,
        "vocab_size": state.vocab_size,
        "n_seed": state.n_seed,
        "corpora": state.corpora,
        "next_topic_id": state.next_topic_id,
        "sweeps_completed": state.sweeps_completed,
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "topics": topics,
        "assignments": {doc.id: state.assignments[doc.id] for doc in state.docs},
    }


def save_state(path: Path, state: ModelState, rng: np.random.Generator | None, vocab_hash: str, header: Mapping[str, Any]) -> None:
    """Write a versioned state file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = state_to_dict(state, rng, vocab_hash, header)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(canonical_json(payload))
        f.write("\n")
    logger.info(f"Saved model state ({state.n_topics} topics, {len(state.docs)} documents) to {path}")


def load_state(
    path: Path,
    docs: list[TokenDocument],
    vocab_hash: str | None = None,
) -> tuple[ModelState, np.random.Generator, dict]:
    """Reload a state by replaying its assignments and checking every stored table.

    Returns:
        The state, an RNG positioned where the saved run stopped, and the
        stored header

    Raises:
        InvariantViolation: If the replayed tables differ from the stored ones
    """
    if not path.exists():
        raise ConfigurationError(f"State file not found: {path}")
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != STATE_FORMAT or payload.get("version") != STATE_VERSION:
        raise DataError(f"{path}: unsupported state format {payload.get('format')!r} v{payload.get('version')}")
    if vocab_hash is not None and payload["vocab_hash"] != vocab_hash:
        raise DataError(f"{path}: state was fitted on vocabulary {payload['vocab_hash']}, documents use {vocab_hash}")

    params = ModelParams.model_validate(payload["params"])
    state = ModelState.from_assignments(
        docs,
        params,
        payload["vocab_size"],
        payload["n_seed"],
        {k: int(v) for k, v in payload["assignments"].items()},
        corpora=payload["corpora"],
        next_topic_id=payload["next_topic_id"],
    )
    state.sweeps_completed = payload.get("sweeps_completed", 0)
    state.verify()

    stored = {t["topic_id"]: t for t in payload["topics"]}
    if sorted(stored) != sorted(state.live_topic_ids):
        raise InvariantViolation("replay", f"stored topics {sorted(stored)} differ from replayed {state.live_topic_ids}")
    for topic in state.topics:
        saved = stored[topic.topic_id]
        replayed = {
            "doc_count": topic.doc_count,
            "per_corpus_doc_count": topic.per_corpus_doc_count,
            "term_counts_labeled": {str(t): n for t, n in topic.term_counts_labeled.items()},
            "term_counts_unlabeled": {str(t): n for t, n in topic.term_counts_unlabeled.items()},
        }
        for key, value in replayed.items():
            if saved[key] != value:
                raise InvariantViolation("replay", f"topic {topic.topic_id}: stored {key} differs from replayed counts")

    rng = np.random.default_rng(params.rng_seed)
    if payload.get("rng_state") is not None:
        rng.bit_generator.state = payload["rng_state"]
    logger.info(f"Loaded and replay-verified state from {path}: {state.n_topics} topics after {state.sweeps_completed} sweeps")
    return state, rng, payload.get("header", {})
