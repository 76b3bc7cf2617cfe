"""Text Preprocessing Pipeline.

This module turns raw labeled and unlabeled records into token documents over
one shared vocabulary:
1. Seed codes of labeled records are mapped to seed topics
2. Texts are normalized, tokenized and stripped of stop words and names
3. Paired corpora are balanced by stratified sampling
4. A joint vocabulary is built with document-frequency pruning

The steps are wired into a compiled workflow at the bottom of the module.
"""

import logging
import math
import re
from collections import Counter, defaultdict
from pathlib import Path
from typing import Callable, Iterable, Protocol, TypeVar

import numpy as np
import pandas as pd
from langgraph.graph import END, START, StateGraph
from pydantic import ValidationError

from agenda_topics.errors import ConfigurationError, DataError, SeedSchemeError
from agenda_topics.state_text import (
    BalanceReport,
    CorpusBookkeeping,
    PreprocessConfig,
    PreprocessState,
    RawRecord,
    Rejection,
    SeedPattern,
    SeedScheme,
    TokenDocument,
    TokenizedDocument,
    VocabularyIndex,
)
from agenda_topics.utils import iter_jsonl

# Set up logger for this module
logger = logging.getLogger("agenda.text")

# ===== NORMALIZATION =====

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_HANDLE_RE = re.compile(r"@\w+")
# Punctuation, digits, underscores and symbols (emoji included) become separators
_SEPARATOR_RE = re.compile(r"[\W\d_]+")
_UMLAUTS = str.maketrans({"ä": "ae", "ö": "oe", "ü": "ue", "ß": "ss"})


def normalize_text(text: str, config: PreprocessConfig) -> str:
    """Canonicalize a text before tokenization.

    Lowercases, transliterates umlauts and ß when enabled, strips URLs and
    @-handles, turns punctuation and digits into single spaces and collapses
    whitespace. The function is idempotent.

    Args:
        text: Raw message or survey response
        config: Preprocessing settings

    Returns:
        Normalized text, possibly empty
    """
    text = text.lower()
    if config.transliterate_umlauts:
        text = text.translate(_UMLAUTS)
    text = _URL_RE.sub(" ", text)
    text = _HANDLE_RE.sub(" ", text)
    text = _SEPARATOR_RE.sub(" ", text)
    return " ".join(text.split())


def blocked_terms(config: PreprocessConfig) -> frozenset[str]:
    """Normalize stop words, custom stop words and blocked names into one term set.

    Multi-word entries such as full candidate names block each of their words.
    """
    entries: set[str] = set()
    entries.update(config.stopwords, config.custom_stopwords, config.name_blocklist)
    blocked: set[str] = set()
    for entry in entries:
        blocked.update(normalize_text(entry, config).split())
    return frozenset(blocked)


def tokenize_and_filter(
    text: str,
    config: PreprocessConfig,
    role: str,
    blocked: frozenset[str] | None = None,
) -> list[str] | Rejection:
    """Split a normalized text and drop stop words and blocked names.

    Args:
        text: Output of :func:`normalize_text`
        config: Preprocessing settings
        role: ``"labeled"`` or ``"unlabeled"``; selects the minimum token count
        blocked: Precomputed :func:`blocked_terms`, computed when omitted

    Returns:
        Surviving terms, or a :class:`Rejection` value
    """
    if blocked is None:
        blocked = blocked_terms(config)
    terms = [term for term in text.split() if term not in blocked]
    minimum = config.min_tokens_labeled if role == "labeled" else config.min_tokens_unlabeled
    if not terms:
        return Rejection(reason="empty", n_tokens=0)
    if len(terms) < minimum:
        return Rejection(reason="too-short", n_tokens=len(terms))
    return terms

# ===== VOCABULARY =====

def _document_frequencies(docs: Iterable[TokenizedDocument]) -> Counter:
    df: Counter = Counter()
    for doc in docs:
        df.update(set(doc.terms))
    return df


def build_vocabulary(
    docs: list[TokenizedDocument],
    config: PreprocessConfig,
) -> tuple[VocabularyIndex, list[TokenDocument], list[tuple[TokenizedDocument, Rejection]]]:
    """Prune rare and ubiquitous terms jointly over all corpora and index the rest.

    Terms outside ``[min_doc_frequency, max(min_doc_frequency,
    floor(max_doc_frequency_fraction * D))]`` are dropped, documents are
    re-checked against their length minimum, and the two steps repeat until
    neither removes anything, so every indexed term occurs in at least
    ``min_doc_frequency`` surviving documents.

    Returns:
        The vocabulary, the token documents in input order, and the documents
        rejected by the re-applied length filter

    Raises:
        ConfigurationError: If no document survives
    """
    if not docs:
        raise ConfigurationError("No documents to build a vocabulary from; all records were rejected")

    surviving = list(docs)
    rejected: list[tuple[TokenizedDocument, Rejection]] = []
    allowed: set[str] = set()
    while True:
        df = _document_frequencies(surviving)
        upper = max(config.min_doc_frequency, math.floor(config.max_doc_frequency_fraction * len(surviving)))
        allowed = {term for term, n in df.items() if config.min_doc_frequency <= n <= upper}
        logger.debug(f"Vocabulary pass over {len(surviving)} docs: {len(allowed)} of {len(df)} terms in band [{config.min_doc_frequency}, {upper}]")

        kept: list[TokenizedDocument] = []
        for doc in surviving:
            terms = [term for term in doc.terms if term in allowed]
            role = "labeled" if doc.seed_topic is not None else "unlabeled"
            minimum = config.min_tokens_labeled if role == "labeled" else config.min_tokens_unlabeled
            if len(terms) < minimum:
                reason = "empty" if not terms else "too-short"
                rejected.append((doc, Rejection(reason=reason, n_tokens=len(terms))))
                continue
            kept.append(doc.model_copy(update={"terms": terms}))

        changed = len(kept) != len(surviving) or len(allowed) != len(df)
        surviving = kept
        if not surviving:
            raise ConfigurationError("All documents were rejected while building the vocabulary; relax the frequency cutoffs")
        if not changed:
            break

    # First occurrence order, lexicographic as tie-break
    first_seen: dict[str, int] = {}
    for doc in surviving:
        for term in doc.terms:
            if term not in first_seen:
                first_seen[term] = len(first_seen)
    ordered = sorted(first_seen, key=lambda t: (first_seen[t], t))
    final_df = _document_frequencies(surviving)
    vocabulary = VocabularyIndex(terms=ordered, doc_frequency=[final_df[t] for t in ordered])
    term_ids = vocabulary.term_ids()

    documents = [
        TokenDocument(
            id=doc.id,
            corpus=doc.corpus,
            tokens=tuple(term_ids[t] for t in doc.terms),
            seed_topic=doc.seed_topic,
            timestamp=doc.timestamp,
            stratum=doc.stratum,
        )
        for doc in surviving
    ]
    logger.info(f"Vocabulary built: V={vocabulary.size}, {len(documents)} documents kept, {len(rejected)} rejected after pruning")
    return vocabulary, documents, rejected

# ===== SEED SCHEME =====

def load_seed_scheme(path: Path) -> SeedScheme:
    """Read a seed scheme table with columns ``pattern``, ``label`` and optional ``type``.

    A label may appear on several rows, one per code pattern. Labels are
    numbered 1..K̂ in order of first appearance.

    Raises:
        SeedSchemeError: On malformed rows, inconsistent types or overlapping patterns
    """
    if not path.exists():
        raise ConfigurationError(f"Seed scheme file not found: {path}")
    sep = "\t" if path.suffix.lower() in {".tsv", ".tab"} else ","
    frame = pd.read_csv(path, sep=sep, dtype=str, comment="#", skipinitialspace=True).fillna("")
    frame.columns = [c.strip().lower() for c in frame.columns]
    if not {"pattern", "label"} <= set(frame.columns):
        raise SeedSchemeError(f"{path}: seed scheme needs 'pattern' and 'label' columns, got {list(frame.columns)}")

    patterns: list[SeedPattern] = []
    labels: list[str] = []
    topic_types: dict[str, str] = {}
    for row_no, row in enumerate(frame.itertuples(index=False), 2):
        label = row.label.strip()
        topic_type = (getattr(row, "type", "") or "policy").strip() or "policy"
        try:
            pattern = SeedPattern(pattern=row.pattern, label=label, topic_type=topic_type)
        except ValidationError as e:
            raise SeedSchemeError(f"{path}:{row_no}: {e.errors()[0]['msg']}") from e
        if not label:
            raise SeedSchemeError(f"{path}:{row_no}: empty label")
        if topic_types.setdefault(label, topic_type) != topic_type:
            raise SeedSchemeError(f"{path}:{row_no}: label {label!r} given two topic types")
        if label not in labels:
            labels.append(label)
        patterns.append(pattern)

    for i, a in enumerate(patterns):
        for b in patterns[i + 1:]:
            if len(a.pattern) == len(b.pattern) and all(
                x == "X" or y == "X" or x == y for x, y in zip(a.pattern, b.pattern)
            ):
                raise SeedSchemeError(f"{path}: patterns {a.pattern} ({a.label}) and {b.pattern} ({b.label}) overlap")

    scheme = SeedScheme(patterns=patterns, labels=labels, topic_types=topic_types)
    logger.info(f"Loaded seed scheme with {len(patterns)} patterns for {scheme.n_topics} topics from {path}")
    return scheme


def assign_seed_topic(record: RawRecord, scheme: SeedScheme) -> int | None:
    """Map a record's seed code to its topic id, or None when no pattern matches."""
    if record.seed_code is None:
        return None
    code = record.seed_code.strip()
    for pattern in scheme.patterns:
        if pattern.matches(code):
            return scheme.topic_id(pattern.label)
    return None

# ===== CORPUS BALANCING =====

class _HasStratum(Protocol):
    stratum: str | None


DocT = TypeVar("DocT", bound=_HasStratum)


def stratified_balance(
    target: list[DocT],
    pool: list[DocT],
    rng_seed: int,
    strata_key: Callable[[DocT], str | None] = lambda doc: doc.stratum,
) -> tuple[list[DocT], BalanceReport]:
    """Sample ``pool`` without replacement to mirror the stratum sizes of ``target``.

    Strata are visited in sorted order and the sample keeps the pool's input
    order, so the result is deterministic for a fixed seed. A stratum with too
    few pool documents is taken whole and reported as a shortfall.

    Returns:
        Sampled pool documents and a per-stratum report
    """
    report = BalanceReport(reference="", pool="")
    rng = np.random.default_rng(rng_seed)

    target_counts: Counter = Counter()
    for doc in target:
        key = strata_key(doc)
        if key is None:
            report.skipped_missing_stratum += 1
            continue
        target_counts[key] += 1

    pool_by_stratum: dict[str, list[int]] = defaultdict(list)
    for i, doc in enumerate(pool):
        key = strata_key(doc)
        if key is None:
            report.skipped_missing_stratum += 1
            continue
        pool_by_stratum[key].append(i)

    if report.skipped_missing_stratum:
        logger.warning(f"Skipped {report.skipped_missing_stratum} documents without a stratum value")

    chosen: list[int] = []
    for stratum in sorted(target_counts):
        wanted = target_counts[stratum]
        available = pool_by_stratum.get(stratum, [])
        report.requested[stratum] = wanted
        if len(available) <= wanted:
            picked = list(available)
            if len(available) < wanted:
                report.shortfall[stratum] = wanted - len(available)
                logger.warning(f"Stratum {stratum!r}: pool has {len(available)} documents, {wanted} requested; taking all")
        else:
            positions = rng.choice(len(available), size=wanted, replace=False)
            picked = [available[p] for p in positions]
        report.sampled[stratum] = len(picked)
        chosen.extend(picked)

    if not pool:
        logger.warning("Balancing pool is empty; nothing sampled")
    sample = [pool[i] for i in sorted(chosen)]
    return sample, report

# ===== RECORD LOADING =====

def load_records(path: Path) -> list[RawRecord]:
    """Read raw records from a JSON-lines file.

    Raises:
        ConfigurationError: If the file is missing or empty
        DataError: On malformed lines or duplicate ids
    """
    records: list[RawRecord] = []
    seen: set[str] = set()
    for line_no, obj in iter_jsonl(path):
        try:
            record = RawRecord.model_validate(obj)
        except ValidationError as e:
            raise DataError(f"{path}:{line_no}: invalid record ({e.errors()[0]['msg']})") from e
        if record.id in seen:
            raise DataError(f"{path}:{line_no}: duplicate record id {record.id!r}")
        seen.add(record.id)
        records.append(record)
    if not records:
        raise ConfigurationError(f"Record file is empty: {path}")
    logger.info(f"Loaded {len(records)} records from {path}")
    return records


def nltk_stopwords(language: str) -> set[str]:
    """Return nltk's standard stop word list for a language."""
    try:
        from nltk.corpus import stopwords
        return set(stopwords.words(language))
    except LookupError as e:
        raise ConfigurationError(
            f"nltk stopword corpus for {language!r} is not installed; run nltk.download('stopwords')"
        ) from e

# ===== WORKFLOW NODES =====

def assign_seed_topics(state: PreprocessState) -> dict:
    """Attach seed topics to labeled records and drop unmatched codes."""
    records = state["records"]
    scheme = state.get("scheme")
    labeled_corpus = state["labeled_corpus"]
    logger.info(f"Assigning seed topics for {len(records)} records (labeled corpus: {labeled_corpus})")

    bookkeeping: dict[str, CorpusBookkeeping] = {}
    excluded_codes: Counter = Counter()
    warnings: list[str] = []
    kept: list[tuple[RawRecord, int | None]] = []

    for record in records:
        book = bookkeeping.setdefault(record.corpus, CorpusBookkeeping())
        book.records += 1
        is_labeled = record.corpus == labeled_corpus
        if is_labeled != (record.seed_code is not None):
            raise DataError(f"Record {record.id!r}: seed_code must be present exactly for the labeled corpus {labeled_corpus!r}")
        if not is_labeled:
            kept.append((record, None))
            continue
        if scheme is None:
            raise ConfigurationError("Labeled records present but no seed scheme configured")
        topic = assign_seed_topic(record, scheme)
        if topic is None:
            book.excluded_seed_code += 1
            excluded_codes[record.seed_code] += 1
            logger.debug(f"Record {record.id} excluded: seed code {record.seed_code} matches no pattern")
            continue
        kept.append((record, topic))

    if excluded_codes:
        total = sum(excluded_codes.values())
        message = f"Excluded {total} labeled records whose seed codes match no pattern ({len(excluded_codes)} distinct codes)"
        logger.warning(message)
        warnings.append(message)

    return {
        "bookkeeping": bookkeeping,
        "excluded_codes": dict(sorted(excluded_codes.items())),
        "warnings": warnings,
        "seeded_records": kept,
    }


def tokenize_documents(state: PreprocessState) -> dict:
    """Normalize and filter every kept record."""
    config = state["config"]
    blocked = blocked_terms(config)
    bookkeeping = state["bookkeeping"]
    seeded = state.get("seeded_records", [])
    logger.info(f"Tokenizing {len(seeded)} records with {len(blocked)} blocked terms")

    tokenized: list[TokenizedDocument] = []
    for record, topic in seeded:
        role = "labeled" if topic is not None else "unlabeled"
        result = tokenize_and_filter(normalize_text(record.text, config), config, role, blocked)
        if isinstance(result, Rejection):
            book = bookkeeping[record.corpus]
            if result.reason == "empty":
                book.rejected_empty += 1
            else:
                book.rejected_too_short += 1
            continue
        tokenized.append(
            TokenizedDocument(
                id=record.id,
                corpus=record.corpus,
                terms=result,
                seed_topic=topic,
                timestamp=record.timestamp,
                stratum=record.stratum,
            )
        )
    logger.info(f"{len(tokenized)} documents survived tokenization")
    return {"tokenized": tokenized, "bookkeeping": bookkeeping}


def balance_corpora(state: PreprocessState) -> dict:
    """Replace each configured pool corpus by a stratified sample."""
    config = state["config"]
    tokenized = state["tokenized"]
    bookkeeping = state["bookkeeping"]
    reports: list[BalanceReport] = []
    warnings: list[str] = []

    for i, pair in enumerate(config.balance):
        target = [d for d in tokenized if d.corpus == pair.reference]
        pool = [d for d in tokenized if d.corpus == pair.pool]
        sample, report = stratified_balance(target, pool, rng_seed=config.balance_seed + i)
        report.reference, report.pool = pair.reference, pair.pool
        reports.append(report)
        if report.shortfall:
            warnings.append(f"Balancing {pair.pool} against {pair.reference}: shortfall in strata {sorted(report.shortfall)}")

        keep_ids = {d.id for d in sample}
        dropped = len(pool) - len(sample)
        if pair.pool in bookkeeping:
            bookkeeping[pair.pool].dropped_by_balance += dropped
        tokenized = [d for d in tokenized if d.corpus != pair.pool or d.id in keep_ids]
        logger.info(f"Balanced {pair.pool} against {pair.reference}: kept {len(sample)} of {len(pool)}")

    return {"tokenized": tokenized, "balance_reports": reports, "bookkeeping": bookkeeping, "warnings": warnings}


def build_vocabulary_node(state: PreprocessState) -> dict:
    """Build the shared vocabulary and final token documents."""
    config = state["config"]
    vocabulary, documents, rejected = build_vocabulary(state["tokenized"], config)
    bookkeeping = state["bookkeeping"]
    for doc, rejection in rejected:
        book = bookkeeping[doc.corpus]
        if rejection.reason == "empty":
            book.rejected_empty += 1
        else:
            book.rejected_too_short += 1
    for doc in documents:
        book = bookkeeping[doc.corpus]
        book.documents += 1
        book.tokens += len(doc.tokens)
    return {"vocabulary": vocabulary, "documents": documents, "bookkeeping": bookkeeping}

# ===== GRAPH CONSTRUCTION =====

# Build the preprocessing workflow
preprocess_builder = StateGraph(PreprocessState)

# Add workflow nodes
preprocess_builder.add_node("assign_seed_topics", assign_seed_topics)
preprocess_builder.add_node("tokenize_documents", tokenize_documents)
preprocess_builder.add_node("balance_corpora", balance_corpora)
preprocess_builder.add_node("build_vocabulary", build_vocabulary_node)

# Add workflow edges
preprocess_builder.add_edge(START, "assign_seed_topics")
preprocess_builder.add_edge("assign_seed_topics", "tokenize_documents")
preprocess_builder.add_edge("tokenize_documents", "balance_corpora")
preprocess_builder.add_edge("balance_corpora", "build_vocabulary")
preprocess_builder.add_edge("build_vocabulary", END)

# Compile the workflow
preprocess_pipeline = preprocess_builder.compile()
