"""State Definitions and Pydantic Schemas for Agenda Analytics.

This module defines the records produced downstream of a fitted model:
topic metadata, pruning reports, salience tables, similarity cells, rank
correlations and regression results, plus the state that flows through the
analysis workflow.
"""

import operator
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
from pydantic import BaseModel, Field
from typing_extensions import Annotated, Literal, Optional, TypedDict

from agenda_topics.model_state import ModelState
from agenda_topics.state_text import RawRecord, TopicType, VocabularyIndex

# ===== TOPICS =====

class TopicMeta(BaseModel):
    """Human-facing identity of a topic."""

    topic_id: int
    label: str
    origin: Literal["seed", "new"]
    topic_type: TopicType = "policy"


class PruneResult(BaseModel):
    """Outcome of dropping new topics smaller than the smallest seed topic."""

    threshold: int = Field(description="Smallest labeled-corpus document count over seed topics.")
    retained: list[int]
    dropped: list[int] = Field(default_factory=list)
    dropped_sizes: dict[int, int] = Field(default_factory=dict)
    residual_docs: int = 0
    unlabeled_docs: int = 0


class TopWords(BaseModel):
    """Highest-weight terms of one topic."""

    topic_id: int
    terms: list[str]
    scores: list[float]

# ===== SALIENCE =====

@dataclass
class SalienceTable:
    """Topic × corpus percentages and the document counts behind them.

    The labeled corpus column is NaN for new topics. ``undefined_corpora``
    lists corpora with no documents in any retained topic; their columns are
    NaN throughout.
    """

    percentages: pd.DataFrame
    counts: pd.DataFrame
    labeled_corpus: Optional[str] = None
    undefined_corpora: list[str] = field(default_factory=list)

    @property
    def corpora(self) -> list[str]:
        return list(self.percentages.columns)

    @property
    def topic_ids(self) -> list[int]:
        return [int(k) for k in self.percentages.index]

# ===== SIMILARITY =====

class SimilarityCell(BaseModel):
    """Cosine similarity of one topic between two corpora, with regression covariates."""

    topic_id: int
    corpus_a: str
    corpus_b: str
    cosine: float = Field(ge=0.0, le=1.0 + 1e-12)
    token_total: int
    survey_in_pair: int
    fbpol_in_pair: int
    twpol_in_pair: int
    twaud_in_pair: int
    same_medium: int
    same_actor: int
    topic_is_politics: int
    topic_is_new: int


class OmittedCell(BaseModel):
    """A (topic, corpus pair) left out of the grid and why."""

    topic_id: int
    corpus_a: str
    corpus_b: str
    reason: str


@dataclass
class SimilarityGrid:
    """All computed cells, ordered by decreasing mean similarity per topic."""

    cells: list[SimilarityCell]
    omitted: list[OmittedCell] = field(default_factory=list)
    topic_order: list[int] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.model_dump() for c in self.cells], columns=list(SimilarityCell.model_fields))

# ===== STATISTICS =====

class CorrelationEntry(BaseModel):
    """Spearman correlation of topic salience between two corpora."""

    corpus_a: str
    corpus_b: str
    rho: Optional[float] = None
    p_value: Optional[float] = None
    n: int
    stars: str = ""
    method: Literal["t", "exact"] = "t"
    note: str = ""


class Coefficient(BaseModel):
    """One row of a regression table."""

    name: str
    estimate: float
    std_error: float
    t_value: float
    p_value: float
    stars: str = ""


class RegressionResult(BaseModel):
    """A fitted OLS model with heteroskedasticity-consistent standard errors."""

    model: str
    subset: Literal["all", "seed", "new"] = "all"
    hc: str = "HC1"
    coefficients: list[Coefficient]
    r_squared: float
    adj_r_squared: float
    n_obs: int
    dropped_predictors: list[str] = Field(default_factory=list)

    def coefficient(self, name: str) -> Coefficient:
        for c in self.coefficients:
            if c.name == name:
                return c
        raise KeyError(name)

# ===== WORKFLOW STATE =====

class AnalysisState(TypedDict, total=False):
    """State flowing through the analysis workflow.

    Inputs are the fitted state, its vocabulary, the run configuration and
    optional raw records and topic metadata; every step adds its product.
    """

    model_state: ModelState
    vocabulary: VocabularyIndex
    config: object
    header: dict
    records: Optional[list[RawRecord]]
    seed_meta: dict[int, TopicMeta]
    topic_metadata: dict[int, TopicMeta]
    output_dir: Path
    prune: PruneResult
    retained: list[int]
    top_words: dict[int, TopWords]
    topic_meta: dict[int, TopicMeta]
    salience: SalienceTable
    correlations: list[CorrelationEntry]
    similarity: SimilarityGrid
    regressions: list[RegressionResult]
    volume: Optional[pd.DataFrame]
    written: Annotated[list[str], operator.add]
    warnings: Annotated[list[str], operator.add]
