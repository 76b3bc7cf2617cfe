"""Tests for pruning, salience, top words, volume and the similarity grid."""

from datetime import date

import numpy as np
import pytest

from agenda_topics.analytics import (
    corpus_topic_vector,
    cosine_similarity_grid,
    daily_volume,
    labeling_samples,
    prune_topics,
    resolve_topic_meta,
    top_words,
    topic_salience,
    volume_frame,
)
from agenda_topics.configuration import CorpusSpec
from agenda_topics.errors import MissingTopicMetadataError
from agenda_topics.model_state import ModelState
from agenda_topics.state_analysis import TopicMeta, TopWords
from agenda_topics.state_model import ModelParams
from agenda_topics.state_text import RawRecord, VocabularyIndex
from tests.conftest import doc

CORPORA = [
    CorpusSpec(name="survey", medium="survey", actor="public", labeled=True),
    CorpusSpec(name="fb", medium="facebook", actor="politicians"),
    CorpusSpec(name="tw", medium="twitter", actor="audience"),
]


@pytest.fixture
def fitted_state() -> ModelState:
    """Seeds 1 and 2 with 3 and 2 labeled documents; new topics 3 (three docs) and 4 (one doc)."""
    docs = [
        doc("g1", (0, 1), corpus="survey", seed=1),
        doc("g2", (0,), corpus="survey", seed=1),
        doc("g3", (1,), corpus="survey", seed=1),
        doc("g4", (2, 3), corpus="survey", seed=2),
        doc("g5", (3,), corpus="survey", seed=2),
        doc("f1", (0, 0, 1), corpus="fb"),
        doc("f2", (2, 3), corpus="fb"),
        doc("f3", (4, 5), corpus="fb"),
        doc("t1", (0, 1, 1), corpus="tw"),
        doc("t2", (4, 4), corpus="tw"),
        doc("t3", (5,), corpus="tw"),
        doc("t4", (6,), corpus="tw"),
    ]
    assignments = {
        "g1": 1, "g2": 1, "g3": 1, "g4": 2, "g5": 2,
        "f1": 1, "f2": 2, "f3": 3, "t1": 1, "t2": 3, "t3": 3, "t4": 4,
    }
    return ModelState.from_assignments(docs, ModelParams(beta=0.5), 7, 2, assignments, corpora=["survey", "fb", "tw"])


class TestPruning:
    def test_threshold_is_smallest_seed(self, fitted_state):
        result = prune_topics(fitted_state, "survey")
        assert result.threshold == 2
        assert result.retained == [1, 2, 3]
        assert result.dropped == [4]
        assert result.dropped_sizes == {4: 1}
        assert result.residual_docs == 1
        assert result.unlabeled_docs == 7

    def test_topic_at_threshold_is_kept(self, fitted_state):
        """New topics 3 = {f3, t2} and 4 = {t3, t4} both have exactly the threshold size."""
        assignments = dict(fitted_state.assignments) | {"t3": 4, "t4": 4}
        state = ModelState.from_assignments(
            fitted_state.docs, fitted_state.params, 7, 2, assignments, corpora=fitted_state.corpora
        )
        result = prune_topics(state, "survey")
        assert result.threshold == 2
        assert result.retained == [1, 2, 3, 4]
        assert result.dropped == []
        assert result.residual_docs == 0

    def test_disabled(self, fitted_state):
        result = prune_topics(fitted_state, "survey", enabled=False)
        assert result.retained == [1, 2, 3, 4]
        assert result.dropped == []

    def test_without_labeled_corpus_nothing_is_dropped(self, fitted_state):
        assert prune_topics(fitted_state, None).retained == [1, 2, 3, 4]


class TestSalience:
    def test_percentages(self, fitted_state):
        table = topic_salience(fitted_state, [1, 2, 3], "survey")
        np.testing.assert_allclose(table.percentages["fb"].to_numpy(), [100 / 3] * 3)
        np.testing.assert_allclose(table.percentages["tw"].to_numpy(), [100 / 3, 0.0, 200 / 3])
        np.testing.assert_allclose(table.percentages.loc[[1, 2], "survey"].to_numpy(), [60.0, 40.0])
        assert np.isnan(table.percentages.loc[3, "survey"])
        assert table.counts.loc[3, "tw"] == 2

    def test_columns_sum_to_hundred(self, fitted_state):
        table = topic_salience(fitted_state, [1, 2, 3, 4], "survey")
        np.testing.assert_allclose(table.percentages.sum(axis=0, skipna=True), 100.0)

    def test_undefined_corpus(self, fitted_state):
        table = topic_salience(fitted_state, [4], "survey")
        assert set(table.undefined_corpora) == {"survey", "fb"}
        assert table.percentages["fb"].isna().all()


class TestTopWords:
    def test_ranked_by_smoothed_count_with_lexicographic_ties(self, fitted_state):
        vocabulary = VocabularyIndex(terms=["rente", "euro", "steuer", "schule", "nato", "krieg", "wahl"])
        words = top_words(fitted_state, vocabulary, 1, 4)
        assert words.terms == ["euro", "rente", "krieg", "nato"]
        assert words.scores == [5.5, 5.5, 0.5, 0.5]

    def test_zero_requested(self, fitted_state):
        vocabulary = VocabularyIndex(terms=[str(i) for i in range(7)])
        assert top_words(fitted_state, vocabulary, 1, 0).terms == []


class TestMetadata:
    def test_missing_new_topic_lists_top_words(self):
        seed = {1: TopicMeta(topic_id=1, label="Taxes", origin="seed")}
        words = {5: TopWords(topic_id=5, terms=["wahl", "kanzler"], scores=[3.0, 2.0])}
        with pytest.raises(MissingTopicMetadataError) as info:
            resolve_topic_meta([1, 5], seed, {}, words)
        assert info.value.missing == {5: ["wahl", "kanzler"]}
        assert "wahl kanzler" in str(info.value)

    def test_resolves_in_retained_order(self):
        seed = {1: TopicMeta(topic_id=1, label="Taxes", origin="seed")}
        new = {5: TopicMeta(topic_id=5, label="Campaign", origin="new", topic_type="politics")}
        assert [m.label for m in resolve_topic_meta([5, 1], seed, new, {})] == ["Campaign", "Taxes"]

    def test_labeling_samples_are_seeded(self, fitted_state):
        first = labeling_samples(fitted_state, 3, 2, rng_seed=1)
        assert first == labeling_samples(fitted_state, 3, 2, rng_seed=1)
        assert len(first) == 2 and set(first) <= {"f3", "t2", "t3"}
        assert labeling_samples(fitted_state, 4, 5, rng_seed=1) == ["t4"]


class TestVolume:
    def test_daily_counts_and_missing_timestamps(self):
        records = [
            RawRecord(id="1", text="x", corpus="fb", timestamp=date(2013, 9, 2)),
            RawRecord(id="2", text="x", corpus="fb", timestamp=date(2013, 9, 1)),
            RawRecord(id="3", text="x", corpus="fb", timestamp=date(2013, 9, 2)),
            RawRecord(id="4", text="x", corpus="fb"),
            RawRecord(id="5", text="x", corpus="tw", timestamp=date(2013, 9, 3)),
        ]
        series, missing = daily_volume(records, "fb")
        assert missing == 1
        assert list(series.index) == [date(2013, 9, 1), date(2013, 9, 2)]
        assert list(series) == [1, 2]

        frame, _ = volume_frame(records, ["fb", "tw"])
        assert frame.loc[date(2013, 9, 3), "fb"] == 0
        assert frame["tw"].sum() == 1


class TestSimilarity:
    def test_corpus_topic_vector(self, fitted_state):
        assert corpus_topic_vector(fitted_state, "fb", 1) == {0: 2, 1: 1}
        assert corpus_topic_vector(fitted_state, "tw", 2) == {}

    def test_grid_cells_and_omissions(self, fitted_state):
        metas = [
            TopicMeta(topic_id=1, label="A", origin="seed", topic_type="politics"),
            TopicMeta(topic_id=2, label="B", origin="seed"),
            TopicMeta(topic_id=3, label="C", origin="new"),
        ]
        grid = cosine_similarity_grid(fitted_state, CORPORA, metas)
        cells = {(c.topic_id, c.corpus_a, c.corpus_b): c for c in grid.cells}

        # Topic 1 in fb is [2, 1, 0...], in tw [1, 2, 0...]
        assert cells[(1, "fb", "tw")].cosine == pytest.approx(4 / 5)
        # Survey vector of topic 1 is [2, 2]
        assert cells[(1, "survey", "fb")].cosine == pytest.approx(6 / (np.sqrt(5) * np.sqrt(8)))
        assert cells[(1, "survey", "fb")].token_total == 7
        assert cells[(1, "fb", "tw")].topic_is_politics == 1
        assert cells[(1, "survey", "fb")].survey_in_pair == 1
        assert cells[(1, "survey", "fb")].fbpol_in_pair == 1
        assert cells[(1, "fb", "tw")].twaud_in_pair == 1
        assert cells[(1, "fb", "tw")].same_medium == 0

        # New topic: only the unlabeled pair; topic 2 has no tw tokens
        assert (3, "fb", "tw") in cells and cells[(3, "fb", "tw")].topic_is_new == 1
        reasons = {(o.topic_id, o.corpus_a, o.corpus_b): o.reason for o in grid.omitted}
        assert reasons[(3, "survey", "fb")] == "labeled corpus has no new topics"
        assert reasons[(2, "survey", "tw")] == "no tokens of tw"
        assert len(grid.cells) + len(grid.omitted) == 9

        assert all(0.0 <= c.cosine <= 1.0 for c in grid.cells)
        assert sorted(grid.topic_order) == [1, 2, 3]
