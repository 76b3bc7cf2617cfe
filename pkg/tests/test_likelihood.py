"""Tests for the document likelihoods and the collapsed joint terms."""

import math

import numpy as np
import pytest

from agenda_topics.likelihood import (
    doc_likelihood_new,
    doc_likelihood_seeded,
    log_dirichlet_multinomial,
    log_partition_prior,
    repeat_offsets,
)
from agenda_topics.state_model import TopicCounts


def topic_with(counts: dict[int, int], labeled: bool = False) -> TopicCounts:
    if labeled:
        return TopicCounts(topic_id=1, is_seed=True, doc_count=1, term_counts_labeled=counts)
    return TopicCounts(topic_id=5, is_seed=False, doc_count=1, term_counts_unlabeled=counts)


class TestSeededLikelihood:
    def test_hand_evaluated_ratio(self):
        """Term a holds 2 of 2 tokens: (2 + 1.5) / (2 + 3)."""
        value = doc_likelihood_seeded([0], topic_with({0: 2}), vocab_size=2, beta=1.5)
        assert value == pytest.approx(math.log(3.5 / 5.0), abs=1e-15)

    def test_labeled_and_unlabeled_counts_combine(self):
        topic = TopicCounts(topic_id=1, is_seed=True, term_counts_labeled={0: 1}, term_counts_unlabeled={0: 1})
        assert doc_likelihood_seeded([0], topic, 2, 1.5) == pytest.approx(math.log(3.5 / 5.0))

    def test_empty_topic_is_uniform(self):
        value = doc_likelihood_seeded([0], topic_with({}), vocab_size=2, beta=1.5)
        assert value == pytest.approx(math.log(0.5))

    def test_single_token_modes_coincide_bitwise(self):
        topic = topic_with({0: 3, 1: 7})
        approx = doc_likelihood_seeded([1], topic, 11, 0.3, mode="paper-approximate")
        exact = doc_likelihood_seeded([1], topic, 11, 0.3, mode="exact-collapsed")
        assert approx == exact

    def test_approximation_does_not_increment_within_document(self):
        topic = topic_with({0: 2})
        approx = doc_likelihood_seeded([0, 0], topic, 2, 1.5, mode="paper-approximate")
        exact = doc_likelihood_seeded([0, 0], topic, 2, 1.5, mode="exact-collapsed")
        assert approx == pytest.approx(2 * math.log(3.5 / 5.0))
        assert exact == pytest.approx(math.log(3.5 / 5.0) + math.log(4.5 / 6.0))

    def test_exclude_doc_false_removes_the_document_first(self):
        with_doc = topic_with({0: 3, 1: 1})
        without_doc = topic_with({0: 2, 1: 1})
        assert doc_likelihood_seeded([0], with_doc, 2, 1.5, exclude_doc=False) == pytest.approx(
            doc_likelihood_seeded([0], without_doc, 2, 1.5)
        )


class TestNewTopicLikelihood:
    def test_approximation_is_inverse_power_of_vocabulary(self):
        assert doc_likelihood_new([0, 3], vocab_size=4, beta=1.5) == pytest.approx(math.log(1 / 16))

    @pytest.mark.parametrize("beta", [0.01, 1.5, 40.0])
    def test_single_token_is_one_over_v_in_both_modes(self, beta):
        for mode in ("paper-approximate", "exact-collapsed"):
            assert doc_likelihood_new([2], 7, beta, mode) == pytest.approx(-math.log(7))

    def test_exact_repeated_term(self):
        value = doc_likelihood_new([0, 0], vocab_size=2, beta=1.5, mode="exact-collapsed")
        assert value == pytest.approx(math.log(0.3125))

    def test_exact_matches_dirichlet_multinomial_marginal(self):
        """The sequential predictive equals the closed-form marginal of the bag."""
        tokens = [0, 2, 2, 1, 2, 0]
        bag = np.bincount(tokens, minlength=5)
        sequential = doc_likelihood_new(tokens, 5, 0.7, mode="exact-collapsed")
        assert sequential == pytest.approx(log_dirichlet_multinomial(bag, 0.7, 5), rel=1e-12)


class TestJointTerms:
    def test_repeat_offsets(self):
        assert repeat_offsets([4, 1, 4, 4, 1]) == [0, 0, 1, 2, 1]

    def test_dirichlet_multinomial_single_token(self):
        assert log_dirichlet_multinomial(np.array([1, 0]), 1.5, 2) == pytest.approx(math.log(0.5))

    def test_partition_prior_of_nothing(self):
        assert log_partition_prior([], 1.0) == 0.0

    def test_partition_prior_sums_to_one_over_partitions_of_three(self):
        """Block sizes of the five partitions of three items: {3}, three × {2,1}, {1,1,1}."""
        alpha = 0.7
        total = (
            math.exp(log_partition_prior([3], alpha))
            + 3 * math.exp(log_partition_prior([2, 1], alpha))
            + math.exp(log_partition_prior([1, 1, 1], alpha))
        )
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_partition_prior_ignores_empty_blocks(self):
        assert log_partition_prior([2, 0, 1], 1.3) == log_partition_prior([2, 1], 1.3)
