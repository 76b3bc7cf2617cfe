"""Tests for exact enumeration, the synthetic generator and recovery scoring."""

from collections import Counter
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from agenda_topics.errors import DataError, InstanceTooLargeError
from agenda_topics.model_state import ModelState
from agenda_topics.oracle import (
    SyntheticSpec,
    canonical_assignment,
    count_canonical_assignments,
    enumerate_exact_posterior,
    generate_synthetic,
    read_ground_truth,
    recovery_score,
    write_fixture,
)
from agenda_topics.persistence import read_documents
from agenda_topics.sampler import conditional_topic_distribution, init_state, sample_assignment
from agenda_topics.state_model import ModelParams
from tests.conftest import doc

# Posterior of the two-document fixture, derived by hand from the collapsed joint
ENUMERATION_FIXTURE = {
    (1, 1): Fraction(2, 7),
    (1, 2): Fraction(5, 21),
    (2, 1): Fraction(1, 7),
    (2, 2): Fraction(1, 7),
    (2, 3): Fraction(4, 21),
}


class TestEnumeration:
    def test_hand_derived_posterior(self, enumeration_docs):
        posterior = enumerate_exact_posterior(enumeration_docs, ModelParams(alpha=1.0, beta=1.5), vocab_size=2, n_seed=1)
        assert posterior.doc_ids == ["d1", "d2"]
        assert set(posterior.probabilities) == set(ENUMERATION_FIXTURE)
        for vector, expected in ENUMERATION_FIXTURE.items():
            assert posterior.probabilities[vector] == pytest.approx(float(expected), abs=1e-12)

    def test_probabilities_sum_to_one(self):
        docs = [doc("g", (0, 1), seed=1), doc("g2", (2,), seed=2)] + [doc(f"m{i}", (i % 3, (i + 1) % 3)) for i in range(4)]
        posterior = enumerate_exact_posterior(docs, ModelParams(alpha=0.5, beta=0.8), vocab_size=3, n_seed=2)
        assert sum(posterior.probabilities.values()) == pytest.approx(1.0, abs=1e-10)
        assert posterior.support_size == count_canonical_assignments(4, 2)

    def test_marginal(self, enumeration_docs):
        posterior = enumerate_exact_posterior(enumeration_docs, ModelParams(), vocab_size=2, n_seed=1)
        marginal = posterior.marginal(0)
        assert marginal[1] == pytest.approx(2 / 7 + 5 / 21)
        assert marginal[2] == pytest.approx(1 / 7 + 1 / 7 + 4 / 21)

    @pytest.mark.parametrize(
        "n_unlabeled, n_open, expected",
        [(0, 3, 1), (1, 0, 1), (2, 1, 5), (3, 0, 5), (4, 0, 15)],
    )
    def test_canonical_counts(self, n_unlabeled, n_open, expected):
        """Without open seeds the count is the Bell number."""
        assert count_canonical_assignments(n_unlabeled, n_open) == expected

    def test_refuses_large_instances(self):
        docs = [doc(f"m{i}", (0,)) for i in range(12)]
        with pytest.raises(InstanceTooLargeError):
            enumerate_exact_posterior(docs, ModelParams(), vocab_size=1, n_seed=0, limit=1000)

    def test_total_variation(self, enumeration_docs):
        posterior = enumerate_exact_posterior(enumeration_docs, ModelParams(), vocab_size=2, n_seed=1)
        exact_counts = {v: round(float(p) * 21_000) for v, p in ENUMERATION_FIXTURE.items()}
        assert posterior.total_variation(exact_counts) < 1e-4
        assert posterior.total_variation({(1, 1): 1}) == pytest.approx(1 - 2 / 7)

    @pytest.mark.slow
    def test_gibbs_is_stationary_for_exact_mode(self, enumeration_docs):
        params = ModelParams(likelihood_mode="exact-collapsed")
        posterior = enumerate_exact_posterior(enumeration_docs, params, vocab_size=2, n_seed=1)
        rng = np.random.default_rng(5)
        state = init_state(enumeration_docs, params, 2, 1, rng=rng)
        counts: Counter = Counter()
        for sweep in range(60_000):
            for i in state.unlabeled_indices:
                sample_assignment(i, state, rng)
            if sweep >= 1_000:
                counts[canonical_assignment(state)] += 1
        assert posterior.total_variation(counts) < 0.02

    @pytest.mark.slow
    def test_gibbs_is_stationary_on_two_token_documents(self):
        docs = [
            doc("labeled", (0, 1), corpus="survey", seed=1),
            doc("d1", (0, 0)),
            doc("d2", (0, 1)),
            doc("d3", (1, 1)),
        ]
        params = ModelParams(alpha=0.8, beta=0.6, likelihood_mode="exact-collapsed")
        posterior = enumerate_exact_posterior(docs, params, vocab_size=2, n_seed=1)
        rng = np.random.default_rng(17)
        state = init_state(docs, params, 2, 1, rng=rng)
        counts: Counter = Counter()
        for sweep in range(41_000):
            for i in state.unlabeled_indices:
                sample_assignment(i, state, rng)
            if sweep >= 1_000:
                counts[canonical_assignment(state)] += 1
        assert posterior.total_variation(counts) < 0.02


class TestMarginalAgainstConditional:
    DOCS = [
        doc("labeled", (0,), corpus="survey", seed=1),
        doc("d1", (0, 1)),
        doc("d2", (1,)),
        doc("d3", (0, 0)),
    ]
    PARAMS = ModelParams(alpha=0.7, beta=0.9, likelihood_mode="exact-collapsed")

    @staticmethod
    def split(vector: tuple[int, ...], position: int, n_seed: int) -> tuple[tuple[int, ...], int | None]:
        """Relabel the other documents canonically; name the held-out topic in that frame (None = fresh)."""
        relabel: dict[int, int] = {}
        others = []
        for j, k in enumerate(vector):
            if j == position:
                continue
            if k > n_seed:
                k = relabel.setdefault(k, n_seed + len(relabel) + 1)
            others.append(k)
        held = vector[position]
        if held <= n_seed:
            return tuple(others), held
        return tuple(others), relabel.get(held)

    @pytest.mark.parametrize("position", [0, 1, 2])
    def test_marginal_is_the_averaged_conditional(self, position):
        posterior = enumerate_exact_posterior(self.DOCS, self.PARAMS, vocab_size=2, n_seed=1)
        groups: dict[tuple[int, ...], dict[int | None, float]] = {}
        for vector, p in posterior.probabilities.items():
            others, held = self.split(vector, position, n_seed=1)
            group = groups.setdefault(others, {})
            group[held] = group.get(held, 0.0) + p

        unlabeled = [d for d in self.DOCS if d.seed_topic is None]
        averaged_seed = 0.0
        for others, group in groups.items():
            weight = sum(group.values())
            assignments = {"labeled": 1, unlabeled[position].id: 1}
            rest = [d.id for j, d in enumerate(unlabeled) if j != position]
            assignments.update(zip(rest, others))
            state = ModelState.from_assignments(self.DOCS, self.PARAMS, 2, 1, assignments)
            state.remove_doc(state.doc_index[unlabeled[position].id])
            conditional = conditional_topic_distribution(state.doc_index[unlabeled[position].id], state).as_dict()

            assert set(group) == set(conditional)
            for label, mass in group.items():
                assert mass / weight == pytest.approx(conditional[label], abs=1e-12)
            averaged_seed += weight * conditional[1]

        marginal = posterior.marginal(position)
        assert marginal[1] == pytest.approx(averaged_seed, abs=1e-12)
        assert sum(marginal.values()) == pytest.approx(1.0, abs=1e-12)


class TestCanonicalAssignment:
    def test_new_topics_renumbered_by_first_appearance(self):
        docs = [doc("g", (0,), seed=1), doc("m1", (0,)), doc("m2", (0,)), doc("m3", (0,))]
        state = ModelState.from_assignments(docs, ModelParams(), 1, 1, {"g": 1, "m1": 9, "m2": 1, "m3": 4})
        assert canonical_assignment(state) == (2, 1, 3)


class TestSynthetic:
    def test_generator_shape_and_truth(self):
        spec = SyntheticSpec(
            n_seed=3, extra_topics=2, vocab_size=25, labeled_docs=10,
            unlabeled_docs={"a": 30, "b": 20}, min_length=2, mean_length=5.0, rng_seed=4,
        )
        corpus = generate_synthetic(spec)
        assert len(corpus.documents) == 60
        labeled = [d for d in corpus.documents if d.seed_topic is not None]
        assert {d.seed_topic for d in labeled[:3]} == {1, 2, 3}
        assert all(d.seed_topic == corpus.truth[d.id] for d in labeled)
        assert all(len(d.tokens) >= 2 for d in corpus.documents)
        assert corpus.phi.shape == (5, 25)
        np.testing.assert_allclose(corpus.phi.sum(axis=1), 1.0)

    def test_generator_is_seeded(self):
        spec = SyntheticSpec(n_seed=2, vocab_size=10, labeled_docs=4, unlabeled_docs={"a": 10}, rng_seed=8)
        assert generate_synthetic(spec).documents == generate_synthetic(spec).documents

    @pytest.mark.slow
    def test_round_trip_recovers_topic_proportions_and_words(self):
        spec = SyntheticSpec(
            n_seed=2, extra_topics=1, vocab_size=10, labeled_docs=0,
            unlabeled_docs={"a": 50_000}, mean_length=8.0, rng_seed=21,
        )
        corpus = generate_synthetic(spec)
        topics = np.array([corpus.truth[d.id] for d in corpus.documents])
        proportions = np.bincount(topics, minlength=4)[1:] / len(topics)
        np.testing.assert_allclose(proportions, corpus.theta, atol=0.01)

        for k in range(1, 4):
            members = [d.tokens for d, z in zip(corpus.documents, topics) if z == k]
            if sum(len(tokens) for tokens in members) < 40_000:
                continue
            words = np.concatenate([np.asarray(tokens) for tokens in members])
            frequencies = np.bincount(words, minlength=10) / len(words)
            np.testing.assert_allclose(frequencies, corpus.phi[k - 1], atol=0.01)

    def test_labeled_corpus_cannot_be_unlabeled(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n_seed=1, vocab_size=3, unlabeled_docs={"survey": 2})

    def test_fixture_round_trip(self, tmp_path: Path):
        corpus = generate_synthetic(SyntheticSpec(n_seed=2, vocab_size=10, labeled_docs=4, unlabeled_docs={"a": 6}))
        sidecar = write_fixture(tmp_path / "fixture.jsonl", corpus, {"kind": "synthetic"})
        assert sidecar.name == "fixture.truth.jsonl"
        assert read_documents(tmp_path / "fixture.jsonl") == corpus.documents
        assert read_ground_truth(sidecar) == corpus.truth


class TestRecovery:
    def test_identical_partitions_up_to_relabeling(self):
        assert recovery_score({"a": 1, "b": 1, "c": 2}, {"a": 7, "b": 7, "c": 3}) == pytest.approx(1.0)

    def test_singletons_against_one_cluster(self):
        truth = {str(i): i for i in range(6)}
        inferred = {str(i): 0 for i in range(6)}
        assert recovery_score(truth, inferred) == pytest.approx(0.0)

    def test_mismatched_documents(self):
        with pytest.raises(DataError):
            recovery_score({"a": 1}, {"b": 1})
