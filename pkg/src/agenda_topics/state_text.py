"""State Definitions and Pydantic Schemas for Text Preprocessing.

This module defines the records, configuration and intermediate document
types that flow through the preprocessing pipeline, plus the graph state used
by the compiled preprocessing workflow.
"""

import operator
import re
from datetime import date, datetime
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing_extensions import Annotated, Literal, Optional, TypedDict

# ===== INPUT RECORDS =====

class RawRecord(BaseModel):
    """One unprocessed message or survey response as read from a record file."""

    model_config = ConfigDict(frozen=True)

    id: str
    text: str
    corpus: str
    seed_code: Optional[str] = None
    timestamp: Optional[date] = None
    stratum: Optional[str] = None

    @field_validator("timestamp", mode="before")
    @classmethod
    def _date_from_datetime(cls, value: Any) -> Any:
        # Platform exports carry full datetimes; only the calendar day is kept
        if isinstance(value, datetime):
            return value.date()
        if isinstance(value, str) and len(value) > 10:
            return datetime.fromisoformat(value.replace("Z", "+00:00")).date()
        return value

    @field_validator("seed_code", "stratum", mode="before")
    @classmethod
    def _blank_to_none(cls, value: Any) -> Any:
        if isinstance(value, str) and not value.strip():
            return None
        return value


# ===== CONFIGURATION =====

class BalancePair(BaseModel):
    """Reference corpus whose strata sizes a paired corpus is sampled down to."""

    reference: str
    pool: str


class PreprocessConfig(BaseModel):
    """Settings for normalization, filtering and vocabulary pruning."""

    stopwords: set[str] = Field(default_factory=set)
    custom_stopwords: set[str] = Field(default_factory=set)
    name_blocklist: set[str] = Field(default_factory=set)
    min_tokens_unlabeled: int = Field(default=3, ge=1)
    min_tokens_labeled: int = Field(default=1, ge=1)
    min_doc_frequency: int = Field(default=2, ge=1)
    max_doc_frequency_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    transliterate_umlauts: bool = True
    stopword_language: Optional[str] = Field(
        default=None,
        description="Optional nltk stopword list merged into `stopwords` (e.g. 'german').",
    )
    balance: list[BalancePair] = Field(default_factory=list)
    balance_seed: int = 0

    @model_validator(mode="after")
    def _check_minimums(self) -> "PreprocessConfig":
        if self.min_tokens_unlabeled < self.min_tokens_labeled:
            raise ValueError("min_tokens_unlabeled must be >= min_tokens_labeled")
        return self


# ===== SEED SCHEME =====

_PATTERN_RE = re.compile(r"^\d*X*$")

TopicType = Literal["policy", "politics", "polity"]


class SeedPattern(BaseModel):
    """A hierarchical code pattern such as ``431X`` mapped to a topic label."""

    model_config = ConfigDict(frozen=True)

    pattern: str
    label: str
    topic_type: TopicType = "policy"

    @field_validator("pattern")
    @classmethod
    def _check_pattern(cls, value: str) -> str:
        value = value.strip().upper()
        if not value or not _PATTERN_RE.match(value):
            raise ValueError(f"pattern {value!r} must be digits followed by X wildcards")
        return value

    def matches(self, code: str) -> bool:
        """Compare digit-wise with X as a wildcard position."""
        if len(code) != len(self.pattern):
            return False
        return all(p == "X" or p == c for p, c in zip(self.pattern, code))


class SeedScheme(BaseModel):
    """Ordered patterns plus the distinct labels they map to (ids 1..K̂)."""

    patterns: list[SeedPattern]
    labels: list[str]
    topic_types: dict[str, TopicType] = Field(default_factory=dict)

    @property
    def n_topics(self) -> int:
        """Number of seed topics K̂."""
        return len(self.labels)

    def topic_id(self, label: str) -> int:
        """Return the 1-based topic id of a label."""
        return self.labels.index(label) + 1

    def label(self, topic_id: int) -> str:
        """Return the label of a 1-based topic id."""
        return self.labels[topic_id - 1]


# ===== DOCUMENTS =====

class Rejection(BaseModel):
    """Why a document did not survive filtering."""

    reason: Literal["too-short", "empty"]
    n_tokens: int


class TokenizedDocument(BaseModel):
    """A filtered document whose tokens are still term strings."""

    id: str
    corpus: str
    terms: list[str]
    seed_topic: Optional[int] = None
    timestamp: Optional[date] = None
    stratum: Optional[str] = None


class TokenDocument(BaseModel):
    """A preprocessed document over the shared vocabulary."""

    model_config = ConfigDict(frozen=True)

    id: str
    corpus: str
    tokens: tuple[int, ...]
    seed_topic: Optional[int] = None
    timestamp: Optional[date] = None
    stratum: Optional[str] = None

    @field_validator("tokens")
    @classmethod
    def _non_empty(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("token documents must contain at least one token")
        return value

    @property
    def is_labeled(self) -> bool:
        """Whether the document carries a seed topic."""
        return self.seed_topic is not None


class VocabularyIndex(BaseModel):
    """Bijection between term strings and dense term ids."""

    terms: list[str]
    doc_frequency: list[int] = Field(default_factory=list)

    @property
    def size(self) -> int:
        """Vocabulary size V."""
        return len(self.terms)

    def term_ids(self) -> dict[str, int]:
        """Return the term → id mapping."""
        return {term: i for i, term in enumerate(self.terms)}


class BalanceReport(BaseModel):
    """Per-stratum outcome of stratified sampling for one corpus pair."""

    reference: str
    pool: str
    requested: dict[str, int] = Field(default_factory=dict)
    sampled: dict[str, int] = Field(default_factory=dict)
    shortfall: dict[str, int] = Field(default_factory=dict)
    skipped_missing_stratum: int = 0


class CorpusBookkeeping(BaseModel):
    """Counts reported by the preprocessing command for one corpus."""

    records: int = 0
    excluded_seed_code: int = 0
    rejected_too_short: int = 0
    rejected_empty: int = 0
    dropped_by_balance: int = 0
    documents: int = 0
    tokens: int = 0


# ===== GRAPH STATE =====

class PreprocessState(TypedDict, total=False):
    """State for the preprocessing workflow.

    Carries raw records through seed assignment, tokenization, corpus
    balancing and vocabulary construction. Warnings accumulate across nodes.
    """

    records: list[RawRecord]
    config: PreprocessConfig
    scheme: Optional[SeedScheme]
    seeded_records: list[tuple[RawRecord, Optional[int]]]
    labeled_corpus: str
    tokenized: list[TokenizedDocument]
    documents: list[TokenDocument]
    vocabulary: VocabularyIndex
    balance_reports: list[BalanceReport]
    bookkeeping: dict[str, CorpusBookkeeping]
    excluded_codes: dict[str, int]
    warnings: Annotated[list[str], operator.add]
