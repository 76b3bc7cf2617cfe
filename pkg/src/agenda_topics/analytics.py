"""Agenda analytics over a fitted model state.

Topic pruning, salience tables, top words, daily volume series, corpus-topic
term vectors and the per-topic cosine-similarity grid. Every function reads
the state without changing it.
"""

import logging
from collections import Counter
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy import sparse
from sklearn.metrics.pairwise import cosine_similarity

from agenda_topics.configuration import CorpusSpec
from agenda_topics.errors import ConfigurationError, DataError, MissingTopicMetadataError
from agenda_topics.model_state import ModelState
from agenda_topics.state_analysis import (
    OmittedCell,
    PruneResult,
    SalienceTable,
    SimilarityCell,
    SimilarityGrid,
    TopicMeta,
    TopWords,
)
from agenda_topics.state_text import RawRecord, SeedScheme, VocabularyIndex

# Set up logger for this module
logger = logging.getLogger("agenda.analytics")

# ===== PRUNING =====

def prune_topics(state: ModelState, labeled_corpus: Optional[str], enabled: bool = True) -> PruneResult:
    """Drop new topics smaller than the smallest seed topic.

    The threshold is the minimum labeled-corpus document count over seed
    topics. A new topic whose document total across the unlabeled corpora is
    strictly below it is dropped; its documents are reported as residual.
    """
    seeds = [k for k in state.live_topic_ids if state.is_seed(k)]
    new = [k for k in state.live_topic_ids if not state.is_seed(k)]
    unlabeled_docs = len(state.unlabeled_indices)

    if labeled_corpus is None or not seeds:
        threshold = 0
    else:
        threshold = min(state.corpus_doc_count(k, labeled_corpus) for k in seeds)
    if not enabled:
        logger.info("Pruning disabled; retaining all topics")
        return PruneResult(threshold=threshold, retained=seeds + new, unlabeled_docs=unlabeled_docs)

    sizes = {
        k: sum(state.corpus_doc_count(k, c) for c in state.corpora if c != labeled_corpus)
        for k in new
    }
    dropped = [k for k in new if sizes[k] < threshold]
    kept = [k for k in new if sizes[k] >= threshold]
    result = PruneResult(
        threshold=threshold,
        retained=seeds + kept,
        dropped=dropped,
        dropped_sizes={k: sizes[k] for k in dropped},
        residual_docs=sum(sizes[k] for k in dropped),
        unlabeled_docs=unlabeled_docs,
    )
    logger.info(
        f"Pruning at threshold {threshold}: kept {len(kept)} of {len(new)} new topics, "
        f"{result.residual_docs} of {unlabeled_docs} unlabeled documents left as residual"
    )
    return result

# ===== SALIENCE =====

def topic_salience(state: ModelState, retained: Sequence[int], labeled_corpus: Optional[str] = None) -> SalienceTable:
    """Percentage of each corpus's documents in each retained topic.

    Denominators count only documents in retained topics. New topics get NaN
    in the labeled corpus column. A corpus with no documents in any retained
    topic gets a NaN column and is listed in ``undefined_corpora``.
    """
    counts = pd.DataFrame(
        [[state.corpus_doc_count(k, c) for c in state.corpora] for k in retained],
        index=pd.Index(list(retained), name="topic_id"),
        columns=list(state.corpora),
        dtype=np.int64,
    )
    totals = counts.sum(axis=0)
    undefined = [c for c in counts.columns if totals[c] == 0]
    for corpus in undefined:
        logger.warning(f"Corpus {corpus!r} has no documents in retained topics; its salience column is undefined")

    percentages = counts.astype(float).div(totals.where(totals > 0), axis=1) * 100.0
    if labeled_corpus is not None and labeled_corpus in percentages.columns:
        new_topics = [k for k in retained if not state.is_seed(k)]
        percentages.loc[new_topics, labeled_corpus] = np.nan
    return SalienceTable(percentages=percentages, counts=counts, labeled_corpus=labeled_corpus, undefined_corpora=undefined)

# ===== TOP WORDS =====

def top_words(state: ModelState, vocabulary: VocabularyIndex, topic_id: int, n: int) -> TopWords:
    """Rank terms by ``n_kw + β`` with ties broken lexicographically."""
    if n <= 0:
        return TopWords(topic_id=topic_id, terms=[], scores=[])
    weights = state.term_count_row(topic_id).astype(float) + state.params.beta
    terms = np.asarray(vocabulary.terms)
    order = np.lexsort((terms, -weights))[:n]
    return TopWords(topic_id=topic_id, terms=[str(terms[i]) for i in order], scores=[float(weights[i]) for i in order])

# ===== VOLUME =====

def daily_volume(records: Iterable[RawRecord], corpus: str) -> tuple[pd.Series, int]:
    """Raw record counts per calendar day for one corpus.

    Returns:
        Date-indexed counts in date order, and the number of records without
        a timestamp that were left out
    """
    days = []
    missing = 0
    for record in records:
        if record.corpus != corpus:
            continue
        if record.timestamp is None:
            missing += 1
        else:
            days.append(record.timestamp)
    if missing:
        logger.warning(f"{missing} records of {corpus!r} have no timestamp and are left out of the volume series")
    series = pd.Series(days, dtype=object).value_counts().sort_index().astype(np.int64)
    series.index.name = "date"
    series.name = corpus
    return series, missing


def volume_frame(records: Sequence[RawRecord], corpora: Sequence[str]) -> tuple[pd.DataFrame, dict[str, int]]:
    """Daily counts of every corpus side by side, zero-filled."""
    columns = {}
    missing = {}
    for corpus in corpora:
        columns[corpus], missing[corpus] = daily_volume(records, corpus)
    frame = pd.DataFrame(columns).fillna(0).astype(np.int64).sort_index()
    frame.index.name = "date"
    return frame, missing

# ===== CORPUS-TOPIC VECTORS =====

def corpus_topic_vector(state: ModelState, corpus: str, topic_id: int) -> dict[int, int]:
    """Unsmoothed term counts of one topic over the documents of one corpus."""
    counts: Counter = Counter()
    for doc in state.docs:
        if doc.corpus == corpus and state.assignments.get(doc.id) == topic_id:
            counts.update(doc.tokens)
    return dict(sorted(counts.items()))


def corpus_topic_matrix(state: ModelState, topics: Sequence[int]) -> sparse.csr_matrix:
    """Stack every corpus-topic vector into one sparse matrix.

    Row ``i * len(corpora) + j`` holds topic ``topics[i]`` in corpus
    ``state.corpora[j]``.
    """
    topic_pos = {k: i for i, k in enumerate(topics)}
    corpus_pos = {c: j for j, c in enumerate(state.corpora)}
    n_corpora = len(state.corpora)
    rows, cols = [], []
    for doc in state.docs:
        k = state.assignments.get(doc.id)
        if k not in topic_pos:
            continue
        r = topic_pos[k] * n_corpora + corpus_pos[doc.corpus]
        rows.extend([r] * len(doc.tokens))
        cols.extend(doc.tokens)
    data = np.ones(len(rows), dtype=np.int64)
    matrix = sparse.coo_matrix((data, (rows, cols)), shape=(len(topics) * n_corpora, state.vocab_size))
    return matrix.tocsr()


def _pair_covariates(a: CorpusSpec, b: CorpusSpec) -> dict[str, int]:
    pair = (a, b)

    def any_of(medium: str, actor: str) -> int:
        return int(any(c.medium == medium and c.actor == actor for c in pair))

    return {
        "survey_in_pair": int(a.labeled or b.labeled),
        "fbpol_in_pair": any_of("facebook", "politicians"),
        "twpol_in_pair": any_of("twitter", "politicians"),
        "twaud_in_pair": any_of("twitter", "audience"),
        "same_medium": int(a.medium == b.medium),
        "same_actor": int(a.actor == b.actor),
    }


def cosine_similarity_grid(
    state: ModelState,
    corpora: Sequence[CorpusSpec],
    topics: Sequence[TopicMeta],
) -> SimilarityGrid:
    """Cosine similarity of every retained topic between every pair of corpora.

    Pairs with the labeled corpus are skipped for new topics. Pairs where a
    vector is zero are omitted with a reason. Topics are ordered by decreasing
    mean similarity, pairs by corpus order within a topic.
    """
    names = [c.name for c in corpora]
    if set(names) != set(state.corpora):
        raise DataError(f"Configured corpora {sorted(names)} differ from the state's {sorted(state.corpora)}")
    row_of_corpus = {c: j for j, c in enumerate(state.corpora)}
    n_corpora = len(state.corpora)
    matrix = corpus_topic_matrix(state, [t.topic_id for t in topics])
    totals = np.asarray(matrix.sum(axis=1)).ravel()

    by_topic: list[tuple[float, int, list[SimilarityCell]]] = []
    omitted: list[OmittedCell] = []
    for i, meta in enumerate(topics):
        block = matrix[i * n_corpora:(i + 1) * n_corpora]
        cosines = cosine_similarity(block)
        cells = []
        for a, b in combinations(corpora, 2):
            ra, rb = row_of_corpus[a.name], row_of_corpus[b.name]
            if meta.origin == "new" and (a.labeled or b.labeled):
                omitted.append(OmittedCell(topic_id=meta.topic_id, corpus_a=a.name, corpus_b=b.name, reason="labeled corpus has no new topics"))
                continue
            ta, tb = int(totals[i * n_corpora + ra]), int(totals[i * n_corpora + rb])
            if ta == 0 or tb == 0:
                empty = a.name if ta == 0 else b.name
                omitted.append(OmittedCell(topic_id=meta.topic_id, corpus_a=a.name, corpus_b=b.name, reason=f"no tokens of {empty}"))
                logger.warning(f"Topic {meta.topic_id}: {empty} has no tokens; cell ({a.name}, {b.name}) omitted")
                continue
            cells.append(
                SimilarityCell(
                    topic_id=meta.topic_id,
                    corpus_a=a.name,
                    corpus_b=b.name,
                    cosine=float(np.clip(cosines[ra, rb], 0.0, 1.0)),
                    token_total=ta + tb,
                    topic_is_politics=int(meta.topic_type == "politics"),
                    topic_is_new=int(meta.origin == "new"),
                    **_pair_covariates(a, b),
                )
            )
        mean = float(np.mean([c.cosine for c in cells])) if cells else float("-inf")
        by_topic.append((mean, meta.topic_id, cells))

    by_topic.sort(key=lambda item: (-item[0], item[1]))
    grid = SimilarityGrid(
        cells=[cell for _, _, cells in by_topic for cell in cells],
        omitted=omitted,
        topic_order=[topic_id for _, topic_id, _ in by_topic],
    )
    logger.info(f"Similarity grid: {len(grid.cells)} cells over {len(topics)} topics, {len(omitted)} omitted")
    return grid

# ===== TOPIC METADATA =====

def seed_topic_meta(scheme: Optional[SeedScheme], n_seed: int) -> dict[int, TopicMeta]:
    """Metadata of the seed topics from the scheme, or generic labels without one."""
    meta = {}
    for k in range(1, n_seed + 1):
        if scheme is not None:
            label = scheme.label(k)
            meta[k] = TopicMeta(topic_id=k, label=label, origin="seed", topic_type=scheme.topic_types.get(label, "policy"))
        else:
            meta[k] = TopicMeta(topic_id=k, label=f"Topic {k}", origin="seed")
    return meta


def load_topic_metadata(path: Path) -> dict[int, TopicMeta]:
    """Read user-supplied labels for new topics (columns ``topic_id``, ``label``, ``type``)."""
    if not path.exists():
        raise ConfigurationError(f"Topic metadata file not found: {path}")
    sep = "\t" if path.suffix in (".tsv", ".tab") else ","
    frame = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, comment="#")
    missing_columns = {"topic_id", "label"} - set(frame.columns)
    if missing_columns:
        raise ConfigurationError(f"{path}: missing columns {sorted(missing_columns)}")
    meta = {}
    for row_no, row in enumerate(frame.itertuples(index=False), 2):
        try:
            entry = TopicMeta(
                topic_id=int(row.topic_id),
                label=row.label.strip(),
                origin="new",
                topic_type=(getattr(row, "type", "") or "policy").strip(),
            )
        except (ValueError, ValidationError) as e:
            raise DataError(f"{path}:{row_no}: invalid topic metadata ({e})") from e
        meta[entry.topic_id] = entry
    logger.info(f"Loaded metadata for {len(meta)} new topics from {path}")
    return meta


def resolve_topic_meta(
    retained: Sequence[int],
    seed_meta: Mapping[int, TopicMeta],
    new_meta: Mapping[int, TopicMeta],
    words: Mapping[int, TopWords],
) -> list[TopicMeta]:
    """Metadata for every retained topic in order.

    Raises:
        MissingTopicMetadataError: Listing the top words of every retained
            new topic without an entry
    """
    out, missing = [], {}
    for k in retained:
        if k in seed_meta:
            out.append(seed_meta[k])
        elif k in new_meta:
            out.append(new_meta[k])
        else:
            missing[k] = words[k].terms if k in words else []
    if missing:
        raise MissingTopicMetadataError(missing)
    return out

# ===== LABELING SUPPORT =====

def labeling_samples(state: ModelState, topic_id: int, n: int, rng_seed: int) -> list[str]:
    """Ids of up to ``n`` documents of a topic, drawn without replacement in insertion order."""
    members = [doc.id for doc in state.docs if state.assignments.get(doc.id) == topic_id]
    if len(members) <= n:
        return members
    rng = np.random.default_rng([rng_seed, topic_id])
    picked = np.sort(rng.choice(len(members), size=n, replace=False))
    return [members[i] for i in picked]
