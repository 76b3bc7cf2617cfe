"""Verification machinery for the sampler.

Exact posterior enumeration over canonical assignments of tiny corpora, a
finite-topic synthetic corpus generator with ground truth, and adjusted Rand
recovery scoring.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import logsumexp
from sklearn.metrics import adjusted_rand_score

from agenda_topics.errors import DataError, InstanceTooLargeError
from agenda_topics.likelihood import log_dirichlet_multinomial, log_partition_prior
from agenda_topics.model_state import ModelState
from agenda_topics.persistence import write_documents
from agenda_topics.state_model import ModelParams
from agenda_topics.state_text import TokenDocument, VocabularyIndex
from agenda_topics.utils import iter_jsonl, write_jsonl

# Set up logger for this module
logger = logging.getLogger("agenda.oracle")

ENUMERATION_LIMIT = 10**6

# ===== EXACT ENUMERATION =====

@dataclass
class EnumeratedPosterior:
    """Exact posterior over canonical assignment vectors.

    Each key lists one topic id per unlabeled document in insertion order.
    Seed topics keep their ids; new topics are numbered K̂+1, K̂+2, ... in
    order of first appearance.
    """

    doc_ids: list[str]
    n_seed: int
    probabilities: dict[tuple[int, ...], float] = field(default_factory=dict)

    @property
    def support_size(self) -> int:
        return len(self.probabilities)

    def marginal(self, position: int) -> dict[int, float]:
        """Posterior over the canonical topic of one unlabeled document."""
        out: dict[int, float] = {}
        for assignment, p in self.probabilities.items():
            out[assignment[position]] = out.get(assignment[position], 0.0) + p
        return dict(sorted(out.items()))

    def total_variation(self, counts: Mapping[tuple[int, ...], int]) -> float:
        """Total-variation distance between this posterior and empirical counts."""
        n = sum(counts.values())
        keys = set(self.probabilities) | set(counts)
        return 0.5 * sum(abs(self.probabilities.get(k, 0.0) - counts.get(k, 0) / n) for k in keys)


def count_canonical_assignments(n_unlabeled: int, n_open: int) -> int:
    """Number of canonical assignment vectors for ``n_unlabeled`` documents.

    ``n_open`` is the number of seed topics a document may join. Each
    document joins an open seed, an already opened new topic, or opens the
    next one.
    """
    ways = {0: 1}
    for _ in range(n_unlabeled):
        step: dict[int, int] = {}
        for m, w in ways.items():
            step[m] = step.get(m, 0) + w * (n_open + m)
            step[m + 1] = step.get(m + 1, 0) + w
        ways = step
    return sum(ways.values())


def _canonical_vectors(seeds: Sequence[int], n_unlabeled: int, n_seed: int) -> Iterator[tuple[int, ...]]:
    def extend(prefix: list[int], n_new: int) -> Iterator[tuple[int, ...]]:
        if len(prefix) == n_unlabeled:
            yield tuple(prefix)
            return
        for k in list(seeds) + list(range(n_seed + 1, n_seed + n_new + 2)):
            prefix.append(k)
            yield from extend(prefix, max(n_new, k - n_seed))
            prefix.pop()

    yield from extend([], 0)


def enumerate_exact_posterior(
    docs: Sequence[TokenDocument],
    params: ModelParams,
    vocab_size: int,
    n_seed: int,
    limit: int = ENUMERATION_LIMIT,
) -> EnumeratedPosterior:
    """Normalize the collapsed joint over every canonical assignment.

    The joint of an assignment is the Chinese-restaurant partition term over
    all documents (labeled ones fixed in their seed topics) times one
    Dirichlet-multinomial word term per topic. Seed topics without labeled
    documents cannot gain members under the sampler and are left out.

    Raises:
        InstanceTooLargeError: If there are more than ``limit`` canonical
            assignments
    """
    labeled = [d for d in docs if d.seed_topic is not None]
    unlabeled = [d for d in docs if d.seed_topic is None]
    seeds = sorted({d.seed_topic for d in labeled if d.seed_topic is not None})
    if any(not 1 <= k <= n_seed for k in seeds):
        raise DataError(f"Seed topics {seeds} fall outside [1..{n_seed}]")

    n_assignments = count_canonical_assignments(len(unlabeled), len(seeds))
    if n_assignments > limit:
        raise InstanceTooLargeError(n_assignments, limit)
    logger.info(f"Enumerating {n_assignments} canonical assignments of {len(unlabeled)} documents")

    def bag(doc: TokenDocument) -> np.ndarray:
        return np.bincount(np.asarray(doc.tokens), minlength=vocab_size)

    base_counts: dict[int, np.ndarray] = {k: np.zeros(vocab_size, dtype=np.int64) for k in seeds}
    base_sizes: dict[int, int] = {k: 0 for k in seeds}
    for doc in labeled:
        base_counts[doc.seed_topic] += bag(doc)  # type: ignore[index]
        base_sizes[doc.seed_topic] += 1  # type: ignore[index]
    bags = [bag(d) for d in unlabeled]

    vectors: list[tuple[int, ...]] = []
    log_joints: list[float] = []
    for vector in _canonical_vectors(seeds, len(unlabeled), n_seed):
        counts = {k: c.copy() for k, c in base_counts.items()}
        sizes = dict(base_sizes)
        for k, b in zip(vector, bags):
            if k not in counts:
                counts[k] = np.zeros(vocab_size, dtype=np.int64)
                sizes[k] = 0
            counts[k] += b
            sizes[k] += 1
        log_joint = log_partition_prior(sizes.values(), params.alpha)
        log_joint += sum(log_dirichlet_multinomial(c, params.beta, vocab_size) for k, c in counts.items() if sizes[k])
        vectors.append(vector)
        log_joints.append(log_joint)

    log_z = logsumexp(log_joints) if log_joints else 0.0
    probabilities = {v: float(np.exp(lj - log_z)) for v, lj in zip(vectors, log_joints)}
    if not probabilities:
        probabilities = {(): 1.0}
    return EnumeratedPosterior(doc_ids=[d.id for d in unlabeled], n_seed=n_seed, probabilities=probabilities)


def canonical_assignment(state: ModelState) -> tuple[int, ...]:
    """Assignment vector of the unlabeled documents with new topics renumbered by first appearance."""
    relabel: dict[int, int] = {}
    out = []
    for i in state.unlabeled_indices:
        k = state.topic_of(i)
        if k is None:
            raise DataError(f"Document {state.docs[i].id!r} is not placed")
        if k > state.n_seed:
            k = relabel.setdefault(k, state.n_seed + len(relabel) + 1)
        out.append(k)
    return tuple(out)

# ===== SYNTHETIC CORPORA =====

class SyntheticSpec(BaseModel):
    """Parameters of a finite-topic synthetic corpus."""

    n_seed: int = Field(ge=1, description="K̂, topics that carry labeled documents.")
    extra_topics: int = Field(default=0, ge=0)
    vocab_size: int = Field(ge=1)
    labeled_corpus: str = "survey"
    labeled_docs: int = Field(default=0, ge=0)
    unlabeled_docs: dict[str, int] = Field(default_factory=dict, description="Corpus name → document count.")
    min_length: int = Field(default=1, ge=1)
    mean_length: float = Field(default=8.0, gt=0.0)
    alpha: float = Field(default=1.0, gt=0.0, description="Concentration of the topic-popularity Dirichlet.")
    beta: float = Field(default=1.5, gt=0.0, description="Concentration of the topic-word Dirichlets.")
    word_concentration: Optional[float] = Field(default=None, gt=0.0, description="Overrides beta for drawing topic-word distributions only.")
    rng_seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "SyntheticSpec":
        if self.mean_length < self.min_length:
            raise ValueError("mean_length must be at least min_length")
        if any(n < 0 for n in self.unlabeled_docs.values()):
            raise ValueError("document counts must be non-negative")
        if self.labeled_corpus in self.unlabeled_docs:
            raise ValueError("the labeled corpus cannot also be an unlabeled corpus")
        return self

    @property
    def n_topics(self) -> int:
        return self.n_seed + self.extra_topics

    @property
    def corpora(self) -> list[str]:
        return [self.labeled_corpus, *self.unlabeled_docs]


@dataclass
class SyntheticCorpus:
    """Generated documents with the parameters that produced them."""

    spec: SyntheticSpec
    documents: list[TokenDocument]
    truth: dict[str, int]
    theta: np.ndarray
    phi: np.ndarray

    @property
    def vocabulary(self) -> VocabularyIndex:
        width = len(str(self.spec.vocab_size - 1))
        return VocabularyIndex(terms=[f"w{t:0{width}d}" for t in range(self.spec.vocab_size)])


def generate_synthetic(spec: SyntheticSpec) -> SyntheticCorpus:
    """Draw a corpus from the finite-topic version of the generative model.

    θ ~ Dirichlet(α), φ_k ~ Dirichlet(β), z ~ Cat(θ), words ~ Mult(φ_z).
    Labeled documents are drawn from the first K̂ topics (the first K̂ of them
    cover every seed once) and carry their topic as seed label. Lengths are
    ``min_length + Poisson(mean_length - min_length)``.
    """
    rng = np.random.default_rng(spec.rng_seed)
    K = spec.n_topics
    theta = rng.dirichlet(np.full(K, spec.alpha))
    word_concentration = spec.word_concentration or spec.beta
    phi = rng.dirichlet(np.full(spec.vocab_size, word_concentration), size=K)
    extra_length = spec.mean_length - spec.min_length

    documents: list[TokenDocument] = []
    truth: dict[str, int] = {}

    def emit(corpus: str, topic: int, labeled: bool) -> None:
        n = spec.min_length + int(rng.poisson(extra_length))
        tokens = rng.choice(spec.vocab_size, size=n, p=phi[topic - 1])
        doc_id = f"{corpus}-{len(documents):06d}"
        documents.append(
            TokenDocument(id=doc_id, corpus=corpus, tokens=tuple(int(t) for t in tokens), seed_topic=topic if labeled else None)
        )
        truth[doc_id] = topic

    seed_theta = theta[: spec.n_seed] / theta[: spec.n_seed].sum()
    for j in range(spec.labeled_docs):
        topic = j + 1 if j < spec.n_seed else int(rng.choice(spec.n_seed, p=seed_theta)) + 1
        emit(spec.labeled_corpus, topic, labeled=True)
    for corpus, n_docs in spec.unlabeled_docs.items():
        topics = rng.choice(K, size=n_docs, p=theta) + 1
        for topic in topics:
            emit(corpus, int(topic), labeled=False)

    logger.info(f"Generated {len(documents)} synthetic documents over {K} topics and V={spec.vocab_size}")
    return SyntheticCorpus(spec=spec, documents=documents, truth=truth, theta=theta, phi=phi)


def write_fixture(path: Path, corpus: SyntheticCorpus, header: Mapping[str, Any]) -> Path:
    """Write the documents plus a ``<stem>.truth.jsonl`` ground-truth sidecar.

    Returns:
        Path of the sidecar
    """
    write_documents(path, corpus.documents, header={**header, "synthetic": corpus.spec.model_dump(mode="json")})
    sidecar = path.with_name(f"{path.stem}.truth.jsonl")
    write_jsonl(sidecar, ({"id": doc_id, "topic": topic} for doc_id, topic in corpus.truth.items()), header=header)
    return sidecar


def read_ground_truth(path: Path) -> dict[str, int]:
    """Read a ground-truth sidecar."""
    return {obj["id"]: int(obj["topic"]) for _, obj in iter_jsonl(path)}

# ===== RECOVERY =====

def recovery_score(truth: Mapping[str, Any], inferred: Mapping[str, Any]) -> float:
    """Adjusted Rand index between two labelings of the same documents.

    Raises:
        DataError: If the document sets differ
    """
    if set(truth) != set(inferred):
        missing = len(set(truth) ^ set(inferred))
        raise DataError(f"Partitions cover different documents ({missing} not shared)")
    ids = sorted(truth)
    return float(adjusted_rand_score([truth[i] for i in ids], [inferred[i] for i in ids]))
