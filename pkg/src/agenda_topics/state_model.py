"""State Definitions and Pydantic Schemas for the Seeded Topic Model.

This module defines the model hyperparameters, the per-topic sufficient
statistics snapshot, the conditional distribution over topics and the
per-sweep diagnostics record.
"""

from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field
from typing_extensions import Literal, Optional

LikelihoodMode = Literal["paper-approximate", "exact-collapsed"]

# ===== HYPERPARAMETERS =====

class ModelParams(BaseModel):
    """Hyperparameters and sampler settings."""

    alpha: float = Field(default=1.0, gt=0.0, description="Dirichlet-process concentration.")
    beta: float = Field(default=1.5, gt=0.0, description="Symmetric topic-word smoothing.")
    sweeps: int = Field(default=100, ge=1, description="Gibbs sweeps after initialization.")
    likelihood_mode: LikelihoodMode = "paper-approximate"
    rng_seed: int = Field(default=0, ge=0, lt=2**64)
    shuffle_sweeps: bool = Field(default=False, description="Visit unlabeled documents in a fresh random order each sweep.")

# ===== SUFFICIENT STATISTICS =====

@dataclass
class TopicCounts:
    """Sufficient statistics of one topic.

    Term counts are sparse maps split by labeled (survey) and unlabeled
    tokens. Instances are snapshots read off a ModelState; editing them does
    not change the state.
    """

    topic_id: int
    is_seed: bool
    doc_count: int = 0
    term_counts_labeled: dict[int, int] = field(default_factory=dict)
    term_counts_unlabeled: dict[int, int] = field(default_factory=dict)
    per_corpus_doc_count: dict[str, int] = field(default_factory=dict)

    @property
    def token_total_labeled(self) -> int:
        """n^G_k·, the labeled token total."""
        return sum(self.term_counts_labeled.values())

    @property
    def token_total_unlabeled(self) -> int:
        """n^M_k·, the unlabeled token total."""
        return sum(self.term_counts_unlabeled.values())

    @property
    def token_total(self) -> int:
        """All tokens in the topic."""
        return self.token_total_labeled + self.token_total_unlabeled

    def term_count(self, term: int) -> int:
        """Combined labeled and unlabeled count of a term."""
        return self.term_counts_labeled.get(term, 0) + self.term_counts_unlabeled.get(term, 0)

# ===== CONDITIONAL =====

@dataclass(frozen=True)
class TopicDistribution:
    """Normalized full conditional over live topics plus the new-topic slot.

    ``topic_ids`` lists the live topics; the final entry of ``probabilities``
    and ``log_weights`` belongs to the new-topic slot.
    """

    topic_ids: tuple[int, ...]
    log_weights: np.ndarray
    probabilities: np.ndarray

    @property
    def new_topic_probability(self) -> float:
        """Mass on opening a new topic."""
        return float(self.probabilities[-1])

    def probability(self, topic_id: int) -> float:
        """Mass on an existing topic."""
        return float(self.probabilities[self.topic_ids.index(topic_id)])

    def as_dict(self) -> dict[Optional[int], float]:
        """Return ``{topic_id: p, None: p_new}``."""
        out: dict[Optional[int], float] = {k: float(p) for k, p in zip(self.topic_ids, self.probabilities)}
        out[None] = self.new_topic_probability
        return out

# ===== DIAGNOSTICS =====

class SweepDiagnostics(BaseModel):
    """One line of the diagnostics stream."""

    sweep: int
    n_topics: int
    n_new_topics: int
    reassignments: int
    log_joint: float
    wall_time: float = 0.0
