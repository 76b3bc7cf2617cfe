"""Tests for count bookkeeping, topic lifecycle and full-recount verification."""

import numpy as np
import pytest

from agenda_topics.errors import DataError, InvariantViolation
from agenda_topics.model_state import ModelState
from agenda_topics.state_model import ModelParams
from tests.conftest import doc


@pytest.fixture
def placed_state() -> ModelState:
    docs = [
        doc("g1", (0, 0, 1), corpus="survey", seed=1),
        doc("g2", (2,), corpus="survey", seed=2),
        doc("m1", (0, 3)),
        doc("m2", (3, 3, 3), corpus="other"),
    ]
    state = ModelState(docs, ModelParams(), vocab_size=4, n_seed=2, corpora=["survey", "social", "other"])
    for i in state.labeled_docs():
        state.add_doc(i, state.docs[i].seed_topic)
    state.add_doc(2, 1)
    state.add_doc(3, state.open_topic())
    return state


class TestBookkeeping:
    def test_counts_after_placement(self, placed_state: ModelState):
        state = placed_state
        assert state.live_topic_ids == [1, 2, 3]
        assert state.doc_count(1) == 2
        np.testing.assert_array_equal(state.term_count_row(1), [3, 1, 0, 1])
        assert state.token_total(3) == 3
        assert state.corpus_doc_count(1, "survey") == 1
        assert state.corpus_doc_count(3, "other") == 1
        state.verify()

    def test_snapshot_splits_labeled_and_unlabeled(self, placed_state: ModelState):
        topic = placed_state.topic(1)
        assert topic.term_counts_labeled == {0: 2, 1: 1}
        assert topic.term_counts_unlabeled == {0: 1, 3: 1}
        assert topic.per_corpus_doc_count == {"survey": 1, "social": 1}
        assert topic.token_total == 5

    def test_conservation(self, placed_state: ModelState):
        state = placed_state
        assert sum(state.doc_count(k) for k in state.live_topic_ids) == len(state.docs)
        assert sum(state.token_total(k) for k in state.live_topic_ids) == sum(len(d.tokens) for d in state.docs)

    def test_term_rows_are_read_only(self, placed_state: ModelState):
        with pytest.raises(ValueError):
            placed_state.term_count_row(1)[0] = 99

    def test_sparse_term_counts(self, placed_state: ModelState):
        terms, counts = placed_state.term_counts(1)
        np.testing.assert_array_equal(terms, [0, 1, 3])
        np.testing.assert_array_equal(counts, [3, 1, 1])


class TestSparseStorage:
    def test_one_cell_per_nonzero_topic_term_pair(self, placed_state: ModelState):
        pairs = {(placed_state.topic_of(i), t) for i, d in enumerate(placed_state.docs) for t in d.tokens}
        assert placed_state.stored_term_cells == len(pairs) == 5

    def test_cells_do_not_scale_with_vocabulary(self):
        docs = [doc("g", (0, 1), corpus="survey", seed=1), doc("m", (5, 5))]
        state = ModelState(docs, ModelParams(), vocab_size=1_000_000, n_seed=1)
        state.add_doc(0, 1)
        state.add_doc(1, state.open_topic())
        assert state.stored_term_cells == 3
        state.verify()

    def test_removal_releases_cells(self, placed_state: ModelState):
        placed_state.remove_doc(2)
        assert placed_state.stored_term_cells == 4
        placed_state.remove_doc(3)
        assert placed_state.stored_term_cells == 3
        placed_state.verify(complete=False)

    def test_weights_after_a_middle_topic_closes(self, placed_state: ModelState):
        state = placed_state
        state.remove_doc(2)
        state.add_doc(2, state.open_topic())
        state.remove_doc(3)
        assert state.live_topic_ids == [1, 2, 4]
        reference = ModelState.from_assignments(
            state.docs, state.params, state.vocab_size, state.n_seed,
            {"g1": 1, "g2": 2, "m1": 4, "m2": 1}, corpora=state.corpora,
        )
        reference.remove_doc(3)
        existing, new = state.log_topic_weights(3)
        expected, expected_new = reference.log_topic_weights(3)
        np.testing.assert_allclose(existing, expected)
        assert new == pytest.approx(expected_new)


class TestTopicLifecycle:
    def test_emptied_new_topic_is_removed(self, placed_state: ModelState):
        state = placed_state
        assert state.remove_doc(3) == 3
        assert state.live_topic_ids == [1, 2]
        assert state.topic_of(3) is None
        state.verify(complete=False)

    def test_emptied_seed_topic_stays(self):
        docs = [doc("m", (0,))]
        state = ModelState(docs, ModelParams(), vocab_size=1, n_seed=1)
        state.add_doc(0, 1)
        state.remove_doc(0)
        assert state.live_topic_ids == [1]
        assert state.doc_count(1) == 0

    def test_ids_are_never_reused(self, placed_state: ModelState):
        state = placed_state
        state.remove_doc(3)
        assert state.open_topic() == 4
        assert 3 not in state.live_topic_ids

    def test_tables_grow_past_initial_capacity(self):
        docs = [doc(f"m{i}", (i % 3,)) for i in range(40)]
        state = ModelState(docs, ModelParams(), vocab_size=3, n_seed=1)
        for i in range(40):
            state.add_doc(i, state.open_topic())
        assert state.n_new_topics == 40
        state.verify()


class TestInvariants:
    def test_labeled_document_cannot_move(self, placed_state: ModelState):
        with pytest.raises(InvariantViolation, match="seed-immutability"):
            placed_state.remove_doc(0)

    def test_labeled_document_only_joins_its_seed(self):
        state = ModelState([doc("g", (0,), seed=1)], ModelParams(), vocab_size=1, n_seed=2)
        with pytest.raises(InvariantViolation):
            state.add_doc(0, 2)

    def test_double_placement(self, placed_state: ModelState):
        with pytest.raises(InvariantViolation, match="single-assignment"):
            placed_state.add_doc(2, 2)

    def test_token_outside_vocabulary(self):
        with pytest.raises(InvariantViolation, match="token-range"):
            ModelState([doc("m", (0, 4))], ModelParams(), vocab_size=4, n_seed=0)

    def test_seed_label_out_of_range(self):
        with pytest.raises(DataError):
            ModelState([doc("g", (0,), seed=3)], ModelParams(), vocab_size=1, n_seed=2)

    def test_verify_detects_corruption(self, placed_state: ModelState):
        placed_state.corrupt_counts(2, term=1, delta=1)
        with pytest.raises(InvariantViolation, match="count-consistency"):
            placed_state.verify()

    def test_verify_requires_every_document_placed(self, placed_state: ModelState):
        placed_state.remove_doc(2)
        with pytest.raises(InvariantViolation, match="conservation"):
            placed_state.verify()


class TestReplay:
    def test_from_assignments_reproduces_tables(self, placed_state: ModelState):
        replayed = ModelState.from_assignments(
            placed_state.docs,
            placed_state.params,
            placed_state.vocab_size,
            placed_state.n_seed,
            placed_state.assignments,
            corpora=placed_state.corpora,
        )
        assert replayed.live_topic_ids == placed_state.live_topic_ids
        for k in replayed.live_topic_ids:
            assert replayed.topic(k) == placed_state.topic(k)
        replayed.verify()

    def test_missing_assignment(self, placed_state: ModelState):
        assignments = dict(placed_state.assignments)
        del assignments["m1"]
        with pytest.raises(DataError):
            ModelState.from_assignments(placed_state.docs, placed_state.params, 4, 2, assignments)
