"""Collapsed Gibbs sampler for the seeded Dirichlet-process mixture.

Unlabeled documents are assigned to seed topics or new topics by iterating
over their full conditionals; labeled documents stay in their seed topics.
All weights are computed in log space and normalized with a max shift. One
numpy Generator drives initialization and every sweep, so a fixed seed gives
identical assignments.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from agenda_topics.errors import InvariantViolation
from agenda_topics.likelihood import log_partition_prior
from agenda_topics.model_state import ModelState
from agenda_topics.state_model import ModelParams, SweepDiagnostics, TopicDistribution
from agenda_topics.state_text import TokenDocument

# Set up logger for this module
logger = logging.getLogger("agenda.sampler")

# ===== CONDITIONAL =====

def _doc_index(doc: TokenDocument | int, state: ModelState) -> int:
    if isinstance(doc, int):
        return doc
    try:
        return state.doc_index[doc.id]
    except KeyError:
        raise InvariantViolation("known-document", f"document {doc.id!r} is not part of the model state") from None


def _normalize(existing: np.ndarray, new: float) -> tuple[np.ndarray, np.ndarray]:
    log_weights = np.append(existing, new)
    shifted = np.exp(log_weights - log_weights.max())
    return log_weights, shifted / shifted.sum()


def conditional_topic_distribution(doc: TokenDocument | int, state: ModelState) -> TopicDistribution:
    """Full conditional of an unplaced unlabeled document over live topics and a new topic.

    Existing topic k has log weight ``log n_k + log p(doc | topic k)`` where
    n_k counts labeled documents too; the new-topic slot has
    ``log α + log p(doc | fresh topic)``.

    Args:
        doc: Document (or its index in ``state.docs``)
        state: Model state with the document already taken out

    Returns:
        Normalized distribution
    """
    i = _doc_index(doc, state)
    if state.docs[i].seed_topic is not None:
        raise InvariantViolation("seed-immutability", f"labeled document {state.docs[i].id!r} has no conditional")
    if state.topic_of(i) is not None:
        raise InvariantViolation("decrement-first", f"document {state.docs[i].id!r} is still counted in topic {state.topic_of(i)}")
    existing, new = state.log_topic_weights(i)
    log_weights, probabilities = _normalize(existing, new)
    return TopicDistribution(tuple(state.live_topic_ids), log_weights, probabilities)


def _draw(weights: np.ndarray, rng: np.random.Generator) -> int:
    # Unnormalized weights are fine; the uniform is scaled by the total
    cdf = np.cumsum(weights)
    slot = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(slot, len(weights) - 1)


def sample_assignment(doc: TokenDocument | int, state: ModelState, rng: np.random.Generator) -> int:
    """Resample the topic of an unlabeled document.

    The document is taken out of its current topic (an emptied new topic is
    removed), a slot is drawn from its conditional, a topic is opened when
    the new-topic slot comes up, and the document is counted in the result.

    Returns:
        The drawn topic id
    """
    i = _doc_index(doc, state)
    if state.topic_of(i) is not None:
        state.remove_doc(i)
    existing, new = state.log_topic_weights(i)
    log_weights = np.append(existing, new)
    slot = _draw(np.exp(log_weights - log_weights.max()), rng)
    live = state.live_topic_ids
    topic_id = state.open_topic() if slot == len(live) else live[slot]
    state.add_doc(i, topic_id)
    return topic_id

# ===== JOINT =====

def log_joint(state: ModelState) -> float:
    """Collapsed log joint of all assignments and words.

    Chinese-restaurant partition term with concentration α over all placed
    documents (labeled included) plus one Dirichlet-multinomial word term per
    non-empty topic.
    """
    beta = state.params.beta
    v_beta = state.vocab_size * beta
    sizes = [state.doc_count(k) for k in state.live_topic_ids]
    total = log_partition_prior(sizes, state.params.alpha)
    for topic_id, n_k in zip(state.live_topic_ids, sizes):
        if n_k == 0:
            continue
        _, counts = state.term_counts(topic_id)
        nonzero = counts.astype(float)
        total += float(
            gammaln(v_beta) - gammaln(nonzero.sum() + v_beta)
            + np.sum(gammaln(nonzero + beta) - gammaln(beta))
        )
    return total

# ===== INITIALIZATION =====

def init_state(
    docs: Sequence[TokenDocument],
    params: ModelParams,
    vocab_size: int,
    n_seed: int,
    rng: np.random.Generator | None = None,
    corpora: Sequence[str] | None = None,
) -> ModelState:
    """Place labeled documents in their seed topics, then stream the unlabeled ones.

    Each unlabeled document, in insertion order, is sampled from its
    conditional given every document placed before it.
    """
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
    state = ModelState(docs, params, vocab_size, n_seed, corpora)
    logger.info(f"Initializing state: {len(state.docs)} documents, {len(state.unlabeled_indices)} unlabeled, V={vocab_size}, K̂={n_seed}")

    for i in state.labeled_docs():
        state.add_doc(i, state.docs[i].seed_topic)
    empty_seeds = [k for k in range(1, n_seed + 1) if state.doc_count(k) == 0]
    if empty_seeds:
        logger.warning(f"Seed topics without labeled documents: {empty_seeds}")

    for i in state.unlabeled_indices:
        sample_assignment(i, state, rng)
    logger.info(f"Initialization placed documents into {state.n_topics} topics ({state.n_new_topics} new)")
    return state

# ===== SWEEPS =====

def gibbs_sweep(state: ModelState, rng: np.random.Generator) -> SweepDiagnostics:
    """Resample every unlabeled document once.

    Documents are visited in insertion order unless ``shuffle_sweeps`` is set.
    """
    start = time.perf_counter()
    order: Sequence[int] = state.unlabeled_indices
    if state.params.shuffle_sweeps:
        order = [state.unlabeled_indices[j] for j in rng.permutation(len(state.unlabeled_indices))]

    reassignments = 0
    for i in order:
        before = state.topic_of(i)
        after = sample_assignment(i, state, rng)
        if after != before:
            reassignments += 1

    state.sweeps_completed += 1
    diagnostics = SweepDiagnostics(
        sweep=state.sweeps_completed,
        n_topics=state.n_topics,
        n_new_topics=state.n_new_topics,
        reassignments=reassignments,
        log_joint=log_joint(state),
        wall_time=time.perf_counter() - start,
    )
    logger.info(
        f"Sweep {diagnostics.sweep}: K={diagnostics.n_topics} ({diagnostics.n_new_topics} new), "
        f"{reassignments} reassignments, log joint {diagnostics.log_joint:.2f}"
    )
    return diagnostics


@dataclass
class InferenceResult:
    """Final state, the RNG that produced it, and per-sweep diagnostics."""

    state: ModelState
    rng: np.random.Generator
    diagnostics: list[SweepDiagnostics] = field(default_factory=list)


def run_inference(
    docs: Sequence[TokenDocument],
    params: ModelParams,
    vocab_size: int,
    n_seed: int,
    corpora: Sequence[str] | None = None,
    resume: tuple[ModelState, np.random.Generator] | None = None,
    verify_every: int = 0,
    on_sweep: Callable[[SweepDiagnostics], None] | None = None,
) -> InferenceResult:
    """Initialize and run ``params.sweeps`` Gibbs sweeps.

    The state after the final sweep is the reported clustering.

    Args:
        docs: Preprocessed documents over a shared vocabulary
        params: Hyperparameters
        vocab_size: V
        n_seed: K̂
        corpora: Corpus order for per-corpus counts
        resume: Continue an existing state and RNG instead of initializing
        verify_every: Full recount check every n sweeps (0 disables; the
            final state is always checked)
        on_sweep: Callback receiving each sweep's diagnostics
    """
    if resume is not None:
        state, rng = resume
        logger.info(f"Resuming from sweep {state.sweeps_completed} for {params.sweeps} more sweeps")
    else:
        rng = np.random.default_rng(params.rng_seed)
        state = init_state(docs, params, vocab_size, n_seed, rng=rng, corpora=corpora)

    result = InferenceResult(state=state, rng=rng)
    for sweep in range(1, params.sweeps + 1):
        diagnostics = gibbs_sweep(state, rng)
        result.diagnostics.append(diagnostics)
        if on_sweep is not None:
            on_sweep(diagnostics)
        if verify_every and sweep % verify_every == 0:
            state.verify()
    state.verify()
    logger.info(f"Inference finished after {state.sweeps_completed} sweeps with {state.n_topics} topics")
    return result
