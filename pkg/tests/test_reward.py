from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clarify.reward import (
    ID3,
    PAPER,
    RewardConfig,
    SequenceScorer,
    UnknownLabelError,
    base_entropy,
    covered_set,
    information_gain,
    marginal_cover,
    step_entropy,
    trajectory_reward,
    validate_trajectory,
)
from oracles import make_random_instance, oracle_reward, random_distinct_sequence

LN3 = math.log(3)


class TestCoveredSet:
    def test_partial_union(self, inv_f1, aq_apply):
        assert covered_set(inv_f1, aq_apply, (1, 2)) == frozenset({0, 1})

    def test_disjoint_label(self, inv_f1, aq_apply):
        assert covered_set(inv_f1, aq_apply, (4,)) == frozenset()

    def test_redundant_label_adds_nothing(self, inv_f1, aq_apply):
        assert covered_set(inv_f1, aq_apply, (0, 1)) == frozenset({0, 1, 2})

    def test_unknown_label(self, inv_f1, aq_apply):
        with pytest.raises(UnknownLabelError):
            covered_set(inv_f1, aq_apply, (17,))


class TestMarginalCover:
    def test_empty_prefix(self, inv_f1, aq_apply):
        assert marginal_cover(inv_f1, aq_apply, (), 0) == frozenset({0, 1, 2})

    def test_fully_shadowed(self, inv_f1, aq_apply):
        assert marginal_cover(inv_f1, aq_apply, (0,), 1) == frozenset()

    def test_partial_shadow(self, inv_f1, aq_apply):
        assert marginal_cover(inv_f1, aq_apply, (1,), 2) == frozenset({1})


class TestEntropies:
    def test_singleton_cover(self, aq_apply):
        assert step_entropy(aq_apply, {0}) == 0.0

    def test_uniform_three(self, aq_apply):
        assert step_entropy(aq_apply, {0, 1, 2}) == pytest.approx(LN3, abs=1e-12)

    def test_empty_cover_convention(self, aq_apply):
        assert step_entropy(aq_apply, frozenset()) == 0.0

    def test_cover_outside_potential_rejected(self, aq_apply):
        with pytest.raises(ValueError):
            step_entropy(aq_apply, {3})

    def test_base_entropy_singleton(self, aq_cancel):
        assert base_entropy(aq_cancel) == 0.0

    def test_base_entropy_three(self, aq_apply):
        assert base_entropy(aq_apply) == pytest.approx(LN3, abs=1e-12)

    def test_base_entropy_four(self, inv_f1):
        from clarify.inventory import AnnotatedQuery

        aq = AnnotatedQuery("anything", frozenset({0, 1, 2, 3}), "train")
        assert base_entropy(aq) == pytest.approx(math.log(4), abs=1e-12)


class TestInformationGain:
    def test_single_broad_label(self, inv_f1, aq_apply):
        assert information_gain(inv_f1, aq_apply, (0,), PAPER) == pytest.approx(0.0, abs=1e-12)
        assert information_gain(inv_f1, aq_apply, (0,), ID3) == pytest.approx(0.0, abs=1e-12)

    def test_full_partition(self, inv_f1, aq_apply):
        tau = (1, 2, 3)
        assert information_gain(inv_f1, aq_apply, tau, PAPER) == pytest.approx(-LN3, abs=1e-12)
        assert information_gain(inv_f1, aq_apply, tau, ID3) == pytest.approx(LN3, abs=1e-12)

    def test_empty_union(self, inv_f1, aq_apply):
        assert information_gain(inv_f1, aq_apply, (4,), PAPER) == pytest.approx(-LN3, abs=1e-12)

    def test_bad_convention(self, inv_f1, aq_apply):
        with pytest.raises(ValueError):
            information_gain(inv_f1, aq_apply, (0,), "other")


class TestTrajectoryReward:
    def test_broad_label(self, inv_f1, aq_apply):
        b = trajectory_reward(inv_f1, aq_apply, (0,), beta=1.0, convention=PAPER)
        assert b.recall_mass == pytest.approx(1.0, abs=1e-12)
        assert b.info_gain == pytest.approx(0.0, abs=1e-12)
        assert b.total == pytest.approx(1.0, abs=1e-12)

    def test_partition_both_conventions(self, inv_f1, aq_apply):
        tau = (1, 2, 3)
        paper = trajectory_reward(inv_f1, aq_apply, tau, 1.0, PAPER)
        id3 = trajectory_reward(inv_f1, aq_apply, tau, 1.0, ID3)
        assert paper.recall_mass == pytest.approx(1.0, abs=1e-12)
        assert paper.total == pytest.approx(1 - LN3, abs=1e-12)
        assert id3.total == pytest.approx(1 + LN3, abs=1e-12)

    def test_useless_label(self, inv_f1, aq_apply):
        b = trajectory_reward(inv_f1, aq_apply, (4,), 1.0, PAPER)
        assert b.recall_mass == 0.0
        assert b.total == pytest.approx(-LN3, abs=1e-12)

    def test_breakdown_consistency(self, inv_f1, aq_apply):
        b = trajectory_reward(inv_f1, aq_apply, (1, 2, 0), 0.5, ID3)
        assert frozenset().union(*b.marginal_covers) == b.covered
        assert b.total == pytest.approx(b.recall_mass + b.beta * b.info_gain, abs=1e-15)
        assert len(b.marginal_covers) == len(b.step_entropies) == 3

    def test_negative_beta_rejected(self, inv_f1, aq_apply):
        with pytest.raises(ValueError):
            trajectory_reward(inv_f1, aq_apply, (0,), beta=-1.0)


class TestTrajectoryValidation:
    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            validate_trajectory((1, 1))

    def test_too_long_rejected(self):
        with pytest.raises(ValueError):
            validate_trajectory(tuple(range(7)), max_len=6)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            validate_trajectory(())


def _random_case(seed):
    rng = random.Random(seed)
    inv, aq = make_random_instance(rng)
    pool = [x.id for x in inv.labels]
    tau = random_distinct_sequence(rng, pool, 6)
    beta = rng.choice([0.0, 0.5, 1.0, 2.0])
    convention = rng.choice([PAPER, ID3])
    return inv, aq, tau, beta, convention


class TestProperties:
    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 10**9))
    def test_matches_bruteforce_oracle(self, seed):
        inv, aq, tau, beta, convention = _random_case(seed)
        got = trajectory_reward(inv, aq, tau, beta, convention)
        assert got.total == pytest.approx(oracle_reward(inv, aq, tau, beta, convention), abs=1e-9)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 10**9))
    def test_marginal_covers_partition_union(self, seed):
        inv, aq, tau, beta, convention = _random_case(seed)
        b = trajectory_reward(inv, aq, tau, beta, convention)
        seen: set[int] = set()
        for d in b.marginal_covers:
            assert not (d & seen)
            seen |= d
        assert frozenset(seen) == b.covered == covered_set(inv, aq, tau)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 10**9))
    def test_recall_permutation_invariant(self, seed):
        inv, aq, tau, beta, convention = _random_case(seed)
        rng = random.Random(seed + 1)
        perm = list(tau)
        rng.shuffle(perm)
        a = trajectory_reward(inv, aq, tau, beta, convention)
        b = trajectory_reward(inv, aq, tuple(perm), beta, convention)
        assert a.recall_mass == pytest.approx(b.recall_mass, abs=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 10**9))
    def test_recall_monotone_in_prefix(self, seed):
        inv, aq, tau, beta, convention = _random_case(seed)
        prev = 0.0
        for k in range(1, len(tau) + 1):
            r = trajectory_reward(inv, aq, tau[:k], beta, convention).recall_mass
            assert r >= prev - 1e-15
            prev = r

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 10**9))
    def test_gain_bounds_under_uniform(self, seed):
        inv, aq, tau, _, _ = _random_case(seed)
        h0 = base_entropy(aq)
        if covered_set(inv, aq, tau):
            assert -h0 - 1e-12 <= information_gain(inv, aq, tau, PAPER) <= 1e-12
            assert -1e-12 <= information_gain(inv, aq, tau, ID3) <= h0 + 1e-12

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 10**9))
    def test_step_entropy_bounded_by_log_cover(self, seed):
        inv, aq, tau, beta, convention = _random_case(seed)
        b = trajectory_reward(inv, aq, tau, beta, convention)
        for d, h in zip(b.marginal_covers, b.step_entropies):
            upper = math.log(len(d)) if d else 0.0
            assert -1e-12 <= h <= upper + 1e-12

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 10**9))
    def test_scorer_matches_reference(self, seed):
        inv, aq, tau, beta, convention = _random_case(seed)
        scorer = SequenceScorer(inv, aq, RewardConfig(beta=beta, convention=convention))
        ref = trajectory_reward(inv, aq, tau, beta, convention)
        assert scorer.score(tau) == pytest.approx(ref.total, abs=1e-12)
        assert scorer.covered_count(tau) == len(ref.covered)
