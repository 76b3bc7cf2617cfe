"""Sampler state: assignments plus incrementally maintained count tables.

Term counts are sparse: each topic row keeps a term → count map and each term
keeps a row → count map, so both hold exactly the nonzero (topic, term) cells.
Per-topic scalars (token totals, document counts, per-corpus document counts)
are small dense arrays addressed through a topic-id → row map. Rows of removed
topics go back to a free list; topic ids are never reused within a run. Live
topics are kept in a fixed order (seed topics first, then new topics in
creation order), which fixes the layout of every conditional distribution and
therefore the RNG-to-outcome mapping.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from agenda_topics.errors import DataError, InvariantViolation
from agenda_topics.likelihood import repeat_offsets
from agenda_topics.state_model import ModelParams, TopicCounts
from agenda_topics.state_text import TokenDocument

# Set up logger for this module
logger = logging.getLogger("agenda.state")

_INITIAL_SPARE_ROWS = 16

SparseCounts = dict[int, int]


@dataclass(frozen=True)
class _DocArrays:
    tokens: np.ndarray
    terms: tuple[int, ...]
    term_counts: tuple[int, ...]
    inverse: np.ndarray
    within: np.ndarray
    position: np.ndarray
    zeros: np.ndarray
    corpus: int
    seed_topic: int | None


def _doc_arrays(doc: TokenDocument, corpus_index: int) -> _DocArrays:
    tokens = np.asarray(doc.tokens, dtype=np.int64)
    unique_terms, inverse, unique_counts = np.unique(tokens, return_inverse=True, return_counts=True)
    return _DocArrays(
        tokens=tokens,
        terms=tuple(int(t) for t in unique_terms),
        term_counts=tuple(int(c) for c in unique_counts),
        inverse=inverse.reshape(-1),
        within=np.asarray(repeat_offsets(doc.tokens), dtype=float),
        position=np.arange(len(tokens), dtype=float),
        zeros=np.zeros(len(tokens), dtype=float),
        corpus=corpus_index,
        seed_topic=doc.seed_topic,
    )


def _bump(table: SparseCounts, key: int, delta: int) -> None:
    """Add to a sparse cell, dropping it when it reaches zero."""
    value = table.get(key, 0) + delta
    if value:
        table[key] = value
    else:
        table.pop(key, None)


def _sparse_distance(a: SparseCounts, b: SparseCounts) -> int:
    return sum(abs(a.get(k, 0) - b.get(k, 0)) for k in a.keys() | b.keys())


class ModelState:
    """All sampler state for one run.

    Attributes:
        params: Hyperparameters
        vocab_size: V
        n_seed: K̂, number of seed topics (ids 1..K̂)
        docs: Token documents in insertion order
        corpora: Corpus tags, indexing the per-corpus count columns
        assignments: Document id → topic id for every placed document
        next_topic_id: Id the next new topic will receive
        sweeps_completed: Gibbs sweeps run on this state
    """

    def __init__(
        self,
        docs: Sequence[TokenDocument],
        params: ModelParams,
        vocab_size: int,
        n_seed: int,
        corpora: Sequence[str] | None = None,
    ):
        if vocab_size < 1:
            raise DataError("Vocabulary size must be positive")
        self.params = params
        self.vocab_size = vocab_size
        self.n_seed = n_seed
        self.docs = list(docs)
        self.doc_index = {doc.id: i for i, doc in enumerate(self.docs)}
        if len(self.doc_index) != len(self.docs):
            raise DataError("Document ids must be unique")

        if corpora is None:
            corpora = list(dict.fromkeys(doc.corpus for doc in self.docs))
        self.corpora = list(corpora)
        corpus_index = {c: j for j, c in enumerate(self.corpora)}

        for doc in self.docs:
            if doc.corpus not in corpus_index:
                raise DataError(f"Document {doc.id!r} has unknown corpus {doc.corpus!r}")
            if doc.seed_topic is not None and not 1 <= doc.seed_topic <= n_seed:
                raise DataError(f"Document {doc.id!r} has seed topic {doc.seed_topic} outside [1..{n_seed}]")
            if max(doc.tokens) >= vocab_size or min(doc.tokens) < 0:
                raise InvariantViolation("token-range", f"document {doc.id!r} has a token id outside [0, {vocab_size})")
        self._arrays = [_doc_arrays(doc, corpus_index[doc.corpus]) for doc in self.docs]
        self.unlabeled_indices = [i for i, doc in enumerate(self.docs) if doc.seed_topic is None]

        capacity = n_seed + _INITIAL_SPARE_ROWS
        self._topic_terms: list[SparseCounts] = [{} for _ in range(capacity)]
        self._labeled_terms: list[SparseCounts] = [{} for _ in range(n_seed)]
        self._term_topics: dict[int, SparseCounts] = {}
        self._token_totals = np.zeros(capacity, dtype=np.int64)
        self._doc_counts = np.zeros(capacity, dtype=np.int64)
        self._corpus_doc_counts = np.zeros((capacity, len(self.corpora)), dtype=np.int64)

        self._row_of: dict[int, int] = {k: k - 1 for k in range(1, n_seed + 1)}
        self._free_rows = list(range(capacity - 1, n_seed - 1, -1))
        self._live_ids: list[int] = list(range(1, n_seed + 1))
        self._live_rows = np.arange(n_seed, dtype=np.int64)
        self._live_position = np.full(capacity, -1, dtype=np.int64)
        self._live_position[:n_seed] = np.arange(n_seed)
        self._doc_topic = np.zeros(len(self.docs), dtype=np.int64)
        self.assignments: dict[str, int] = {}
        self.next_topic_id = n_seed + 1
        self.sweeps_completed = 0

    # ===== TOPIC BOOKKEEPING =====

    @property
    def live_topic_ids(self) -> list[int]:
        """Live topic ids, seed topics first then new topics in creation order."""
        return list(self._live_ids)

    @property
    def n_topics(self) -> int:
        """Number of live topics K."""
        return len(self._live_ids)

    @property
    def n_new_topics(self) -> int:
        """Number of live non-seed topics."""
        return len(self._live_ids) - self.n_seed

    @property
    def stored_term_cells(self) -> int:
        """Nonzero (topic, term) cells held in the sparse term tables."""
        return sum(len(terms) for terms in self._topic_terms)

    def is_seed(self, topic_id: int) -> bool:
        """Whether a topic id belongs to a seed topic."""
        return 1 <= topic_id <= self.n_seed

    def _grow(self) -> None:
        old = len(self._topic_terms)
        extra = old
        self._topic_terms.extend({} for _ in range(extra))
        self._token_totals = np.concatenate([self._token_totals, np.zeros(extra, dtype=np.int64)])
        self._doc_counts = np.concatenate([self._doc_counts, np.zeros(extra, dtype=np.int64)])
        self._corpus_doc_counts = np.vstack([self._corpus_doc_counts, np.zeros((extra, len(self.corpora)), dtype=np.int64)])
        self._live_position = np.concatenate([self._live_position, np.full(extra, -1, dtype=np.int64)])
        self._free_rows = list(range(old + extra - 1, old - 1, -1)) + self._free_rows
        logger.debug(f"Grew topic rows from {old} to {old + extra}")

    def open_topic(self, topic_id: int | None = None) -> int:
        """Create an empty new topic and return its id.

        Args:
            topic_id: Explicit id, used when replaying persisted assignments;
                defaults to :attr:`next_topic_id`
        """
        if topic_id is None:
            topic_id = self.next_topic_id
        if topic_id <= self.n_seed or topic_id in self._row_of:
            raise InvariantViolation("topic-id", f"topic id {topic_id} is a seed id or already live")
        if not self._free_rows:
            self._grow()
        row = self._free_rows.pop()
        self._row_of[topic_id] = row
        self._live_position[row] = len(self._live_ids)
        self._live_ids.append(topic_id)
        self._live_rows = np.append(self._live_rows, row)
        self.next_topic_id = max(self.next_topic_id, topic_id + 1)
        return topic_id

    def _close_topic(self, topic_id: int) -> None:
        row = self._row_of.pop(topic_id)
        position = self._live_ids.index(topic_id)
        del self._live_ids[position]
        self._live_rows = np.delete(self._live_rows, position)
        self._live_position[row] = -1
        self._live_position[self._live_rows[position:]] -= 1
        self._free_rows.append(row)
        logger.debug(f"Removed empty topic {topic_id}")

    # ===== DOCUMENT MOVES =====

    def topic_of(self, doc_index: int) -> int | None:
        """Topic id currently holding a document, None when unplaced."""
        topic = int(self._doc_topic[doc_index])
        return topic or None

    def _shift_terms(self, row: int, a: _DocArrays, sign: int) -> None:
        topic_terms = self._topic_terms[row]
        for term, count in zip(a.terms, a.term_counts):
            _bump(topic_terms, term, sign * count)
            topics = self._term_topics.setdefault(term, {})
            _bump(topics, row, sign * count)
            if not topics:
                del self._term_topics[term]

    def add_doc(self, doc_index: int, topic_id: int) -> None:
        """Place an unplaced document into a live topic and increment its counts."""
        if self._doc_topic[doc_index]:
            raise InvariantViolation("single-assignment", f"document {self.docs[doc_index].id!r} is already placed")
        a = self._arrays[doc_index]
        if a.seed_topic is not None and topic_id != a.seed_topic:
            raise InvariantViolation("seed-immutability", f"labeled document {self.docs[doc_index].id!r} must stay in topic {a.seed_topic}")
        row = self._row_of[topic_id]
        self._shift_terms(row, a, +1)
        self._token_totals[row] += len(a.tokens)
        self._doc_counts[row] += 1
        self._corpus_doc_counts[row, a.corpus] += 1
        if a.seed_topic is not None:
            labeled = self._labeled_terms[row]
            for term, count in zip(a.terms, a.term_counts):
                _bump(labeled, term, count)
        self._doc_topic[doc_index] = topic_id
        self.assignments[self.docs[doc_index].id] = topic_id

    def remove_doc(self, doc_index: int) -> int:
        """Take an unlabeled document out of its topic; empty new topics are removed.

        Returns:
            The topic id the document left
        """
        a = self._arrays[doc_index]
        if a.seed_topic is not None:
            raise InvariantViolation("seed-immutability", f"labeled document {self.docs[doc_index].id!r} cannot be moved")
        topic_id = int(self._doc_topic[doc_index])
        if not topic_id:
            raise InvariantViolation("single-assignment", f"document {self.docs[doc_index].id!r} is not placed")
        row = self._row_of[topic_id]
        self._shift_terms(row, a, -1)
        self._token_totals[row] -= len(a.tokens)
        self._doc_counts[row] -= 1
        self._corpus_doc_counts[row, a.corpus] -= 1
        self._doc_topic[doc_index] = 0
        del self.assignments[self.docs[doc_index].id]
        if not self.is_seed(topic_id) and self._doc_counts[row] == 0:
            self._close_topic(topic_id)
        return topic_id

    # ===== LIKELIHOOD KERNEL =====

    def log_topic_weights(self, doc_index: int) -> tuple[np.ndarray, float]:
        """Unnormalized log weights of an unplaced document.

        Returns:
            Weights of the live topics in :attr:`live_topic_ids` order, and the
            weight of the new-topic slot
        """
        a = self._arrays[doc_index]
        beta = self.params.beta
        v_beta = self.vocab_size * beta
        if self.params.likelihood_mode == "exact-collapsed":
            within, position = a.within, a.position
        else:
            within, position = a.zeros, a.zeros

        rows = self._live_rows
        unique_counts = np.zeros((len(rows), len(a.terms)))
        for j, term in enumerate(a.terms):
            topics = self._term_topics.get(term)
            if topics:
                unique_counts[self._live_position[list(topics)], j] = list(topics.values())
        counts = unique_counts[:, a.inverse]
        numer = np.log(counts + (beta + within)).sum(axis=1)
        denom = np.log(self._token_totals[rows][:, None] + (v_beta + position)).sum(axis=1)
        with np.errstate(divide="ignore"):
            log_prior = np.log(self._doc_counts[rows].astype(float))
        existing = log_prior + (numer - denom)

        new_lik = np.log(beta + within).sum() - np.log(v_beta + position).sum()
        new = float(np.log(self.params.alpha) + new_lik)
        return existing, new

    # ===== SNAPSHOTS =====

    def topic(self, topic_id: int) -> TopicCounts:
        """Snapshot the sufficient statistics of a live topic."""
        row = self._row_of[topic_id]
        labeled = dict(self._labeled_terms[row]) if self.is_seed(topic_id) else {}
        unlabeled = dict(self._topic_terms[row])
        for term, count in labeled.items():
            _bump(unlabeled, term, -count)
        return TopicCounts(
            topic_id=topic_id,
            is_seed=self.is_seed(topic_id),
            doc_count=int(self._doc_counts[row]),
            term_counts_labeled=dict(sorted(labeled.items())),
            term_counts_unlabeled=dict(sorted(unlabeled.items())),
            per_corpus_doc_count={c: int(n) for c, n in zip(self.corpora, self._corpus_doc_counts[row]) if n},
        )

    @property
    def topics(self) -> list[TopicCounts]:
        """Snapshots of all live topics in order."""
        return [self.topic(k) for k in self._live_ids]

    def term_counts(self, topic_id: int) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero combined term counts of a topic as (terms, counts), terms ascending."""
        terms = self._topic_terms[self._row_of[topic_id]]
        ordered = sorted(terms)
        return np.asarray(ordered, dtype=np.int64), np.asarray([terms[t] for t in ordered], dtype=np.int64)

    def term_count_row(self, topic_id: int) -> np.ndarray:
        """Combined term counts of a topic expanded to a read-only length-V array."""
        terms, counts = self.term_counts(topic_id)
        row = np.zeros(self.vocab_size, dtype=np.int64)
        row[terms] = counts
        row.flags.writeable = False
        return row

    def doc_count(self, topic_id: int) -> int:
        """n_k of a live topic."""
        return int(self._doc_counts[self._row_of[topic_id]])

    def corpus_doc_count(self, topic_id: int, corpus: str) -> int:
        """Documents of one corpus in a live topic."""
        return int(self._corpus_doc_counts[self._row_of[topic_id], self.corpora.index(corpus)])

    def token_total(self, topic_id: int) -> int:
        """All tokens of a live topic."""
        return int(self._token_totals[self._row_of[topic_id]])

    # ===== VERIFICATION =====

    def verify(self, complete: bool = True) -> None:
        """Rebuild every table from the assignments and compare exactly.

        Args:
            complete: Also require every document to be placed

        Raises:
            InvariantViolation: Naming the first invariant that fails
        """
        capacity = len(self._topic_terms)
        topic_terms: list[SparseCounts] = [{} for _ in range(capacity)]
        labeled_terms: list[SparseCounts] = [{} for _ in range(self.n_seed)]
        token_totals = np.zeros(capacity, dtype=np.int64)
        doc_counts = np.zeros(capacity, dtype=np.int64)
        corpus_counts = np.zeros_like(self._corpus_doc_counts)

        for i, a in enumerate(self._arrays):
            topic_id = int(self._doc_topic[i])
            doc_id = self.docs[i].id
            if a.seed_topic is not None and topic_id != a.seed_topic:
                raise InvariantViolation("seed-immutability", f"labeled document {doc_id!r} is in topic {topic_id}, seed {a.seed_topic}")
            if not topic_id:
                if complete:
                    raise InvariantViolation("conservation", f"document {doc_id!r} is not placed")
                continue
            if self.assignments.get(doc_id) != topic_id:
                raise InvariantViolation("assignment-map", f"document {doc_id!r} map says {self.assignments.get(doc_id)}, table says {topic_id}")
            if topic_id not in self._row_of:
                raise InvariantViolation("live-topic", f"document {doc_id!r} points at dead topic {topic_id}")
            row = self._row_of[topic_id]
            for term, count in zip(a.terms, a.term_counts):
                _bump(topic_terms[row], term, count)
                if a.seed_topic is not None:
                    _bump(labeled_terms[row], term, count)
            token_totals[row] += len(a.tokens)
            doc_counts[row] += 1
            corpus_counts[row, a.corpus] += 1

        for name, rebuilt, maintained in (
            ("doc-counts", doc_counts, self._doc_counts),
            ("token-totals", token_totals, self._token_totals),
            ("corpus-doc-counts", corpus_counts, self._corpus_doc_counts),
        ):
            if not np.array_equal(rebuilt, maintained):
                diff = int(np.abs(rebuilt - maintained).sum())
                raise InvariantViolation("count-consistency", f"{name} differ from a full recount by {diff}")
        for name, rebuilt_rows, maintained_rows in (
            ("term-counts", topic_terms, self._topic_terms),
            ("labeled-term-counts", labeled_terms, self._labeled_terms),
        ):
            diff = sum(_sparse_distance(r, m) for r, m in zip(rebuilt_rows, maintained_rows))
            if diff:
                raise InvariantViolation("count-consistency", f"{name} differ from a full recount by {diff}")

        by_term: dict[int, SparseCounts] = {}
        for row, terms in enumerate(self._topic_terms):
            for term, count in terms.items():
                by_term.setdefault(term, {})[row] = count
        if by_term != self._term_topics:
            raise InvariantViolation("count-consistency", "term index disagrees with the topic term tables")

        if len(self.assignments) != int(doc_counts.sum()):
            raise InvariantViolation("conservation", "assignment map size differs from the summed document counts")
        if int(self._token_totals.sum()) != sum(sum(terms.values()) for terms in self._topic_terms):
            raise InvariantViolation("conservation", "token totals differ from summed term counts")
        for topic_id in self._live_ids[self.n_seed:]:
            if self._doc_counts[self._row_of[topic_id]] == 0:
                raise InvariantViolation("no-empty-new-topic", f"new topic {topic_id} is live but empty")

    # ===== CONSTRUCTION =====

    @classmethod
    def from_assignments(
        cls,
        docs: Sequence[TokenDocument],
        params: ModelParams,
        vocab_size: int,
        n_seed: int,
        assignments: Mapping[str, int],
        corpora: Sequence[str] | None = None,
        next_topic_id: int | None = None,
    ) -> "ModelState":
        """Replay persisted assignments into fresh count tables.

        New topics are opened in ascending id order, which is their creation
        order since ids are never reused.
        """
        state = cls(docs, params, vocab_size, n_seed, corpora)
        for topic_id in sorted({k for k in assignments.values() if k > n_seed}):
            state.open_topic(topic_id)
        for i, doc in enumerate(state.docs):
            if doc.id not in assignments:
                raise DataError(f"No assignment for document {doc.id!r}")
            state.add_doc(i, assignments[doc.id])
        if next_topic_id is not None:
            state.next_topic_id = max(state.next_topic_id, next_topic_id)
        return state

    def corrupt_counts(self, topic_id: int, term: int, delta: int = 1) -> None:
        """Shift one term count without touching the assignments (fault injection only)."""
        row = self._row_of[topic_id]
        _bump(self._topic_terms[row], term, delta)
        topics = self._term_topics.setdefault(term, {})
        _bump(topics, row, delta)
        if not topics:
            del self._term_topics[term]

    def labeled_docs(self) -> Iterable[int]:
        """Indices of labeled documents."""
        return (i for i, a in enumerate(self._arrays) if a.seed_topic is not None)
