"""Tests for the full conditional, sampling moves, sweeps and the log joint."""

import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from agenda_topics.errors import InvariantViolation
from agenda_topics.likelihood import doc_likelihood_new, doc_likelihood_seeded
from agenda_topics.model_state import ModelState
from agenda_topics.sampler import (
    conditional_topic_distribution,
    gibbs_sweep,
    init_state,
    log_joint,
    run_inference,
    sample_assignment,
)
from agenda_topics.state_model import ModelParams
from tests.conftest import doc


class TestConditional:
    def test_hand_derived_fixture(self, conditional_state):
        state, query = conditional_state
        dist = conditional_topic_distribution(query, state)
        expected = [Fraction(7, 15), Fraction(3, 15), Fraction(5, 15)]
        np.testing.assert_allclose(dist.probabilities, [float(p) for p in expected], atol=1e-12)
        assert dist.topic_ids == (1, 2)
        assert dist.probabilities.sum() == pytest.approx(1.0, abs=1e-12)

    def test_log_and_direct_domain_agree(self, conditional_state):
        state, query = conditional_state
        dist = conditional_topic_distribution(query, state)
        direct = np.exp(dist.log_weights) / np.exp(dist.log_weights).sum()
        np.testing.assert_allclose(direct, dist.probabilities, atol=1e-9)

    def test_vanishing_alpha(self):
        docs = [doc("seed-a", (0, 0), seed=1), doc("seed-b", (1, 1), seed=2), doc("query", (0,))]
        state = ModelState(docs, ModelParams(alpha=1e-12), vocab_size=2, n_seed=2)
        for i in state.labeled_docs():
            state.add_doc(i, state.docs[i].seed_topic)
        assert conditional_topic_distribution(2, state).new_topic_probability < 1e-11

    def test_mirror_image_seeds_are_equal(self):
        docs = [doc("a", (0, 0), seed=1), doc("b", (1, 1), seed=2), doc("q", (0, 1))]
        state = ModelState(docs, ModelParams(), vocab_size=2, n_seed=2)
        for i in state.labeled_docs():
            state.add_doc(i, state.docs[i].seed_topic)
        dist = conditional_topic_distribution(2, state)
        assert dist.probability(1) == pytest.approx(dist.probability(2), abs=1e-15)

    def test_labeled_documents_weight_the_prior(self):
        """Two identical seed topics differing only in labeled document count."""
        docs = [
            doc("a1", (0,), seed=1),
            doc("a2", (1,), seed=1),
            doc("b1", (0, 1), seed=2),
            doc("q", (2,)),
        ]
        state = ModelState(docs, ModelParams(), vocab_size=3, n_seed=2)
        for i in state.labeled_docs():
            state.add_doc(i, state.docs[i].seed_topic)
        dist = conditional_topic_distribution(3, state)
        # Same word counts, so the ratio is the document-count ratio n_1 / n_2 = 2
        assert dist.probability(1) / dist.probability(2) == pytest.approx(2.0)

    def test_requires_decrement_first(self, conditional_state):
        state, query = conditional_state
        state.add_doc(query, 1)
        with pytest.raises(InvariantViolation, match="decrement-first"):
            conditional_topic_distribution(query, state)

    def test_labeled_document_has_no_conditional(self, conditional_state):
        state, _ = conditional_state
        with pytest.raises(InvariantViolation):
            conditional_topic_distribution(0, state)

    def test_modes_bitwise_equal_on_single_tokens(self, conditional_state):
        state, query = conditional_state
        approx = conditional_topic_distribution(query, state)
        state.params = state.params.model_copy(update={"likelihood_mode": "exact-collapsed"})
        exact = conditional_topic_distribution(query, state)
        assert np.array_equal(approx.probabilities, exact.probabilities)


class TestKernelAgainstReference:
    @pytest.mark.parametrize("mode", ["paper-approximate", "exact-collapsed"])
    def test_weights_match_likelihood_functions(self, mode):
        docs = [doc("g1", (0, 0, 1), seed=1), doc("g2", (2, 3, 3, 3), seed=2), doc("g3", (4,), seed=3)]
        docs += [doc(f"m{i}", (i % 5, i % 5, (i * 3) % 5, i % 2, (i * 3) % 5)) for i in range(20)]
        params = ModelParams(alpha=1.3, beta=0.4, likelihood_mode=mode)
        state = init_state(docs, params, vocab_size=5, n_seed=3, rng=np.random.default_rng(11))
        rng = np.random.default_rng(12)
        for _ in range(3):
            gibbs_sweep(state, rng)

        for i in state.unlabeled_indices:
            tokens = state.docs[i].tokens
            home = state.remove_doc(i)
            existing, new = state.log_topic_weights(i)
            for weight, topic_id in zip(existing, state.live_topic_ids):
                n_k = state.doc_count(topic_id)
                if n_k == 0:
                    assert weight == -np.inf
                    continue
                expected = math.log(n_k) + doc_likelihood_seeded(tokens, state.topic(topic_id), 5, 0.4, mode)
                assert weight == pytest.approx(expected, abs=1e-12)
            assert new == pytest.approx(math.log(1.3) + doc_likelihood_new(tokens, 5, 0.4, mode), abs=1e-12)
            if home not in state.live_topic_ids:
                state.open_topic(home)
            state.add_doc(i, home)
        state.verify()


class TestSampleAssignment:
    def test_new_slot_opens_a_topic(self):
        docs = [doc("q", (0,))]
        state = ModelState(docs, ModelParams(), vocab_size=1, n_seed=0)
        topic = sample_assignment(0, state, np.random.default_rng(0))
        assert topic == 1
        assert state.n_topics == 1 and state.doc_count(1) == 1

    def test_degenerate_distribution(self):
        """With α tiny and one heavily matching seed, every draw lands in it."""
        docs = [doc("a", (0,) * 50, seed=1), doc("q", (0,))]
        state = ModelState(docs, ModelParams(alpha=1e-300), vocab_size=50, n_seed=1)
        state.add_doc(0, 1)
        rng = np.random.default_rng(1)
        for _ in range(200):
            assert sample_assignment(1, state, rng) == 1

    @pytest.mark.slow
    def test_frequencies_match_fixture(self, conditional_state):
        state, query = conditional_state
        rng = np.random.default_rng(2024)
        tally: Counter = Counter()
        n = 100_000
        for _ in range(n):
            topic = sample_assignment(query, state, rng)
            tally[topic if state.is_seed(topic) else "new"] += 1
            state.remove_doc(query)
        assert tally[1] / n == pytest.approx(7 / 15, abs=0.01)
        assert tally[2] / n == pytest.approx(3 / 15, abs=0.01)
        assert tally["new"] / n == pytest.approx(5 / 15, abs=0.01)


class TestSweeps:
    def test_zero_unlabeled_documents(self):
        docs = [doc("a", (0,), seed=1), doc("b", (1,), seed=2)]
        state = init_state(docs, ModelParams(), vocab_size=2, n_seed=2)
        assert state.n_topics == 2
        diagnostics = gibbs_sweep(state, np.random.default_rng(0))
        assert diagnostics.reassignments == 0
        assert diagnostics.n_topics == 2

    def test_labeled_assignments_never_change(self):
        docs = [doc(f"g{i}", (i % 4, (i + 1) % 4), seed=1 + i % 2) for i in range(6)]
        docs += [doc(f"m{i}", (i % 4, (i * 3) % 4, 2)) for i in range(20)]
        result = run_inference(docs, ModelParams(sweeps=10, rng_seed=3), vocab_size=4, n_seed=2)
        for d in docs[:6]:
            assert result.state.assignments[d.id] == d.seed_topic
        assert len(result.diagnostics) == 10
        assert [d.sweep for d in result.diagnostics] == list(range(1, 11))

    def test_same_seed_same_chain(self):
        docs = [doc("g", (0, 1), seed=1)] + [doc(f"m{i}", (i % 5, (i * 7) % 5)) for i in range(30)]
        params = ModelParams(sweeps=5, rng_seed=42)
        first = run_inference(docs, params, vocab_size=5, n_seed=1)
        second = run_inference(docs, params, vocab_size=5, n_seed=1)
        assert first.state.assignments == second.state.assignments
        assert [d.log_joint for d in first.diagnostics] == [d.log_joint for d in second.diagnostics]

    def test_shuffled_sweeps_stay_consistent(self):
        docs = [doc("g", (0, 1), seed=1)] + [doc(f"m{i}", (i % 5, (i * 7) % 5)) for i in range(30)]
        result = run_inference(docs, ModelParams(sweeps=4, shuffle_sweeps=True), vocab_size=5, n_seed=1, verify_every=1)
        result.state.verify()

    def test_resume_continues_the_stream(self):
        docs = [doc("g", (0, 1), seed=1)] + [doc(f"m{i}", (i % 5, (i * 7) % 5)) for i in range(30)]
        straight = run_inference(docs, ModelParams(sweeps=6, rng_seed=9), 5, 1)
        half = run_inference(docs, ModelParams(sweeps=3, rng_seed=9), 5, 1)
        resumed = run_inference(docs, ModelParams(sweeps=3, rng_seed=9), 5, 1, resume=(half.state, half.rng))
        assert resumed.state.assignments == straight.state.assignments
        assert resumed.state.sweeps_completed == 6


class TestLogJoint:
    def test_empty(self):
        state = ModelState([], ModelParams(), vocab_size=2, n_seed=0)
        assert log_joint(state) == 0.0

    def test_single_labeled_document(self):
        state = init_state([doc("a", (0,), seed=1)], ModelParams(alpha=1.0, beta=1.5), vocab_size=2, n_seed=1)
        assert log_joint(state) == pytest.approx(math.log(0.5))

    def test_invariant_to_new_topic_ids(self):
        docs = [doc("g", (0,), seed=1), doc("m1", (1, 1)), doc("m2", (2,)), doc("m3", (1, 2))]
        params = ModelParams(alpha=0.8, beta=0.5)
        a = ModelState.from_assignments(docs, params, 3, 1, {"g": 1, "m1": 2, "m2": 3, "m3": 2})
        b = ModelState.from_assignments(docs, params, 3, 1, {"g": 1, "m1": 7, "m2": 4, "m3": 7})
        assert log_joint(a) == pytest.approx(log_joint(b), abs=1e-12)
