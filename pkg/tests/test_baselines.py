from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clarify.inventory import AnnotatedQuery, Corpus, candidate_labels, intent_probabilities
from clarify.policy import (
    GREEDY,
    ModelConfig,
    TrainConfig,
    greedy_cover_sequence,
    greedy_recommend,
    supervised_targets,
    train_greedy_classifier,
    train_no_state_transition,
    train_supervised,
)
from clarify.reward import ID3, PAPER, RewardConfig, SequenceScorer
from oracles import make_random_instance, oracle_best_sequence

EXACT_P = np.array([1 / 3, 1 / 3, 1 / 3, 0.0])


class TestGreedyRule:
    def test_first_pick_is_broadest(self, inv_f1):
        tau = greedy_cover_sequence(inv_f1, EXACT_P, 1, support_threshold=1 / 8)
        assert tau == (0,)  # "apply" scores 1.0, everything else <= 2/3

    def test_zero_scores_fall_back_to_phrase_order(self, inv_f1):
        tau = greedy_cover_sequence(inv_f1, EXACT_P, 2, support_threshold=1 / 8)
        # after "apply" covers the support, scores tie at 0 and the
        # casefolded-smallest remaining phrase wins: "cancel"
        assert tau == (0, 4)

    def test_n_zero(self, inv_f1):
        assert greedy_cover_sequence(inv_f1, EXACT_P, 0, support_threshold=1 / 8) == ()

    def test_requested_beyond_vocabulary_clips(self, inv_f1):
        tau = greedy_cover_sequence(inv_f1, EXACT_P, 99, support_threshold=1 / 8)
        assert len(tau) == 5
        assert len(set(tau)) == 5


def one_query_corpus(inv, aq) -> Corpus:
    test_q = AnnotatedQuery(aq.text, aq.potential_intents, "test")
    return Corpus(inventory=inv, queries=[aq, test_q], seed=0)


@pytest.fixture(scope="module")
def fitted():
    from conftest import make_f1_inventory

    inv = make_f1_inventory()
    aq = AnnotatedQuery("how to apply", frozenset({0, 1, 2}), "train")
    corpus = one_query_corpus(inv, aq)
    cfg = TrainConfig(epochs=300, lr=0.5, momentum=0.9, seed=0)
    baseline, log = train_greedy_classifier(corpus, cfg, ModelConfig(dim=8, heads=2, seed=0))
    return corpus, baseline, log


class TestGreedyClassifier:
    def test_perfect_fit_toy_case(self, fitted):
        corpus, baseline, _ = fitted
        aq = corpus.train[0]
        probs = baseline.model.probabilities(aq.text)
        target = np.zeros(len(corpus.inventory.intents))
        for s, p in intent_probabilities(aq).items():
            target[s] = p
        assert 0.5 * np.abs(probs - target).sum() <= 0.01  # total variation

    def test_validation_kl_decreases(self, fitted):
        _, _, log = fitted
        assert log.epochs[-1]["val_kl"] < log.epochs[0]["val_kl"]

    def test_recommend_uses_fitted_distribution(self, fitted, inv_f1):
        corpus, baseline, _ = fitted
        tau = greedy_recommend(baseline, inv_f1, corpus.train[0], 2)
        assert tau[0] == 0  # "apply" covers all the estimated mass

    def test_zero_loss_at_exact_fit(self, inv_f1):
        # when the classifier output equals the target distribution, the
        # training loss is (numerically) zero
        from clarify.policy import ClassifierExample, ClassifierModel, classifier_loss_and_grads

        model = ClassifierModel(ModelConfig(dim=8, heads=2, seed=3), {"apply": 0}, 4)
        z, _ = model.forward_state([0])
        batch = [ClassifierExample((0,), tuple(z))]
        loss, _ = classifier_loss_and_grads(model, batch, TrainConfig())
        assert loss == pytest.approx(0.0, abs=1e-6)

    def test_variant_guard(self, fitted, inv_f1):
        _, baseline, _ = fitted
        assert baseline.variant == GREEDY
        with pytest.raises(ValueError):
            from clarify.policy import BaselineModel

            greedy_recommend(BaselineModel("supervised", baseline.model), inv_f1, "x", 1)


class TestSupervisedTargets:
    def test_fixture_optimum(self, inv_f1, aq_apply):
        rcfg = RewardConfig(convention=ID3)
        got = supervised_targets(inv_f1, aq_apply, 3, rcfg)
        assert got.exhaustive
        # the returned sequence itself attains the optimum 1 + ln 3, e.g. the
        # singleton partition ("credit card", "loan", "QR code") in any order
        assert got.reward == pytest.approx(1 + math.log(3), abs=1e-12)
        assert SequenceScorer(inv_f1, aq_apply, rcfg).score(got.trajectory) == pytest.approx(
            got.reward, abs=1e-12
        )

    def test_singleton_candidate(self, inv_f1):
        aq = AnnotatedQuery("apply loan now", frozenset({1}), "train")
        got = supervised_targets(inv_f1, aq, 1, RewardConfig())
        assert got.trajectory in ((0,), (2,))
        assert len(got.trajectory) == 1

    def test_budget_branch_flags_non_exhaustive(self):
        rng = random.Random(5)
        from clarify.inventory import Intent, Inventory, Label

        intents = [Intent(i, f"i{i}", f"a{i}") for i in range(6)]
        labels = [Label(j, f"l{j}", frozenset({j % 6})) for j in range(14)]
        inv = Inventory(intents=intents, labels=labels)
        aq = AnnotatedQuery("q", frozenset(range(6)), "train")
        got = supervised_targets(inv, aq, 3, RewardConfig(), budget=64, rng=np.random.default_rng(1))
        assert not got.exhaustive
        assert len(got.trajectory) == 3

    def test_seeded_tie_break_deterministic(self, inv_f1, aq_apply):
        a = supervised_targets(inv_f1, aq_apply, 3, RewardConfig(convention=ID3), rng=np.random.default_rng(3))
        b = supervised_targets(inv_f1, aq_apply, 3, RewardConfig(convention=ID3), rng=np.random.default_rng(3))
        assert a == b

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_exhaustive_matches_independent_enumerator(self, seed):
        rng = random.Random(seed)
        inv, aq = make_random_instance(rng, max_intents=6, max_labels=6)
        cands = candidate_labels(inv, aq)
        if not cands:
            return
        n = rng.randint(1, 3)
        convention = rng.choice([PAPER, ID3])
        got = supervised_targets(inv, aq, n, RewardConfig(convention=convention))
        _, best = oracle_best_sequence(inv, aq, cands, n, 1.0, convention)
        assert got.exhaustive
        assert got.reward == pytest.approx(best, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_dominates_greedy_cover(self, seed):
        rng = random.Random(seed)
        inv, aq = make_random_instance(rng, max_intents=8, max_labels=8)
        cands = candidate_labels(inv, aq)
        if not cands:
            return
        rcfg = RewardConfig(convention=ID3)
        got = supervised_targets(inv, aq, 3, rcfg)
        probs = np.zeros(len(inv.intents))
        for s, p in intent_probabilities(aq).items():
            probs[s] = p
        greedy_tau = greedy_cover_sequence(inv, probs, 3, support_threshold=1e-9)
        scorer = SequenceScorer(inv, aq, rcfg)
        assert got.reward >= scorer.score(greedy_tau) - 1e-9


class TestSupervisedModel:
    def test_memorizes_single_query_teacher(self, inv_f1, aq_apply):
        corpus = one_query_corpus(inv_f1, aq_apply)
        rcfg = RewardConfig(convention=ID3)
        # mask_to_candidates off so the training support matches inference
        # (on a one-query corpus non-candidate logits would stay untrained)
        cfg = TrainConfig(epochs=60, lr=0.3, seed=1, mask_to_candidates=False)
        baseline, log = train_supervised(corpus, cfg, rcfg, horizon=3, model_cfg=ModelConfig(dim=8, heads=2, seed=1))
        teacher = supervised_targets(inv_f1, aq_apply, 3, rcfg, rng=np.random.default_rng(cfg.seed))
        assert baseline.recommend(inv_f1, aq_apply.text, 3) == teacher.trajectory
        assert log.epochs[-1]["mean_loss"] < log.epochs[0]["mean_loss"]


class TestNoStateTransition:
    def test_decoding_never_repeats(self, inv_f1, aq_apply):
        corpus = one_query_corpus(inv_f1, aq_apply)
        baseline, _ = train_no_state_transition(
            corpus, TrainConfig(epochs=5, seed=2), ModelConfig(dim=8, heads=2, seed=2)
        )
        for n in range(1, 6):
            tau = baseline.recommend(inv_f1, aq_apply.text, n)
            assert len(tau) == len(set(tau)) == n

    def test_learns_relevance_mass_ordering(self, inv_f1, aq_apply):
        corpus = one_query_corpus(inv_f1, aq_apply)
        baseline, _ = train_no_state_transition(
            corpus, TrainConfig(epochs=200, lr=0.5, seed=2), ModelConfig(dim=8, heads=2, seed=2)
        )
        probs = baseline.model.probabilities(aq_apply.text)
        # "apply" holds the largest relevance mass (3/3 of the potential set)
        assert int(np.argmax(probs)) == 0
