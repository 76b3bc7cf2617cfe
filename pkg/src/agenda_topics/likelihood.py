"""Document likelihoods and collapsed joint terms.

Scalar reference implementations over sparse topic counts. The sampler has a
vectorized version of the same arithmetic; both evaluate the ascending
factorial as a sum of logs so that, with zero within-document offsets, the
approximate and exact forms coincide bit for bit on one-token documents.
"""

import math
from collections import Counter
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from agenda_topics.state_model import LikelihoodMode, TopicCounts


def repeat_offsets(tokens: Sequence[int]) -> list[int]:
    """Occurrence index of each token among earlier equal tokens in the document."""
    seen: Counter = Counter()
    offsets = []
    for token in tokens:
        offsets.append(seen[token])
        seen[token] += 1
    return offsets


def _offsets(tokens: Sequence[int], mode: LikelihoodMode) -> tuple[list[int], list[int]]:
    if mode == "exact-collapsed":
        return repeat_offsets(tokens), list(range(len(tokens)))
    return [0] * len(tokens), [0] * len(tokens)


def doc_likelihood_seeded(
    tokens: Sequence[int],
    topic: TopicCounts,
    vocab_size: int,
    beta: float,
    mode: LikelihoodMode = "paper-approximate",
    exclude_doc: bool = True,
) -> float:
    """Log probability of a document under an existing topic.

    In paper-approximate mode the counts are not incremented within the
    document; exact-collapsed mode is the Pólya predictive.

    Args:
        tokens: Term ids of the document
        topic: Topic statistics
        vocab_size: V
        beta: Topic-word smoothing
        mode: Likelihood form
        exclude_doc: True when ``topic`` already excludes the document; False
            when the document is still counted and must be removed first

    Returns:
        Log likelihood
    """
    term_counts = Counter({t: topic.term_count(t) for t in set(tokens)})
    total = topic.token_total
    if not exclude_doc:
        term_counts.subtract(Counter(tokens))
        total -= len(tokens)

    within, position = _offsets(tokens, mode)
    numer = sum(math.log(term_counts[t] + (beta + j)) for t, j in zip(tokens, within))
    denom = sum(math.log(total + (vocab_size * beta + i)) for i in position)
    return numer - denom


def doc_likelihood_new(
    tokens: Sequence[int],
    vocab_size: int,
    beta: float,
    mode: LikelihoodMode = "paper-approximate",
) -> float:
    """Log probability of a document under a fresh Dirichlet(β) topic.

    Paper-approximate mode equals ``-n_d * log V``; it is computed as
    ``sum(log β) - sum(log Vβ)`` to share the exact form's arithmetic.
    """
    within, position = _offsets(tokens, mode)
    numer = sum(math.log(beta + j) for j in within)
    denom = sum(math.log(vocab_size * beta + i) for i in position)
    return numer - denom


def log_dirichlet_multinomial(counts: np.ndarray, beta: float, vocab_size: int) -> float:
    """Log marginal of a sequence of words with per-term ``counts`` under Dirichlet(β).

    ``counts`` holds the nonzero (or all) term counts of one topic.
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    return float(
        gammaln(vocab_size * beta) - gammaln(total + vocab_size * beta)
        + np.sum(gammaln(counts + beta) - gammaln(beta))
    )


def log_partition_prior(sizes: Iterable[int], alpha: float) -> float:
    """Log probability of a partition with the given block sizes under a CRP(α)."""
    sizes = [n for n in sizes if n > 0]
    total = sum(sizes)
    if total == 0:
        return 0.0
    return float(
        len(sizes) * math.log(alpha)
        + sum(gammaln(n) for n in sizes)
        + gammaln(alpha) - gammaln(alpha + total)
    )
