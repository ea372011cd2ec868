"""The three reference recommenders the policy is compared against.

* greedy: an intent classifier scores labels by the estimated probability
  mass of their marginal intent cover; labels are picked one at a time.
* supervised: the sequence architecture trained with teacher forcing on the
  highest-reward label sequence per query.
* no_state_transition: a history-free label classifier decoded top-n with
  previous picks masked.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from ..inventory import AnnotatedQuery, Corpus, Inventory, candidate_labels, intent_probabilities, tokenize
from ..reward import RewardConfig, SequenceScorer, Trajectory
from .model import ClassifierModel, ModelConfig, PolicyModel
from .train import (
    KL_TARGET_TO_MODEL,
    ClassifierExample,
    PolicyExample,
    TrainConfig,
    TrainingLog,
    build_token_vocab,
    classifier_loss_and_grads,
    iter_batches,
    kl_training_step,
)

logger = logging.getLogger(__name__)

GREEDY = "greedy"
SUPERVISED = "supervised"
NO_STATE_TRANSITION = "no_state_transition"


@dataclass
class BaselineModel:
    variant: str
    model: PolicyModel | ClassifierModel
    # greedy only: intents below this estimated probability are treated as
    # outside the classifier's support when building marginal covers
    support_threshold: float = 0.0

    @property
    def kind(self) -> str:
        return "baseline"

    @property
    def inventory_hash(self) -> str:
        return self.model.inventory_hash

    def recommend(self, inv: Inventory, query_text: str, n: int) -> Trajectory:
        if self.variant == SUPERVISED:
            return self.model.recommend(inv, query_text, n)
        if self.variant == GREEDY:
            probs = self.model.probabilities(query_text)
            return greedy_cover_sequence(inv, probs, n, self.support_threshold)
        if self.variant == NO_STATE_TRANSITION:
            probs = self.model.probabilities(query_text)
            order = np.argsort(-probs, kind="stable")
            return tuple(int(x) for x in order[: min(n, len(order))])
        raise ValueError(f"unknown baseline variant {self.variant!r}")


def _query_text(query) -> str:
    return query.text if isinstance(query, AnnotatedQuery) else query


# ---------------------------------------------------------------------------
# Greedy
# ---------------------------------------------------------------------------

def train_greedy_classifier(
    corpus: Corpus,
    cfg: TrainConfig,
    model_cfg: ModelConfig | None = None,
) -> tuple[BaselineModel, TrainingLog]:
    """Fit the intent classifier to the uniform potential-intent distribution."""
    inv = corpus.inventory
    vocab = build_token_vocab(corpus)
    model_cfg = model_cfg or ModelConfig(seed=cfg.seed)
    model = ClassifierModel(model_cfg, vocab, len(inv.intents), inv.content_hash())
    n_intents = len(inv.intents)

    def example(aq: AnnotatedQuery) -> ClassifierExample:
        target = np.zeros(n_intents)
        for sid, p in intent_probabilities(aq).items():
            target[sid] = p
        return ClassifierExample(tuple(model.token_ids(tokenize(aq.text))), tuple(target))

    train_examples = [example(q) for q in corpus.train]
    val_examples = [example(q) for q in corpus.test]
    rng = np.random.default_rng(cfg.seed)
    velocity: dict = {}
    log = TrainingLog()
    for epoch in range(cfg.epochs):
        losses = [
            kl_training_step(model, batch, cfg, velocity)
            for batch in iter_batches(train_examples, cfg.batch_size, rng)
        ]
        record = {"epoch": epoch, "mean_loss": float(np.mean(losses)) if losses else 0.0}
        if val_examples:
            val_loss, _ = classifier_loss_and_grads(model, val_examples, cfg)
            record["val_kl"] = val_loss
        log.epochs.append(record)
    return BaselineModel(GREEDY, model, support_threshold=1.0 / n_intents), log


def greedy_cover_sequence(
    inv: Inventory,
    probs: np.ndarray,
    n: int,
    support_threshold: float,
) -> Trajectory:
    """Pick labels by the highest estimated mass of their marginal intent cover.

    The cover bookkeeping is restricted to the classifier's support (intents
    at or above ``support_threshold``).  Score ties fall back to the
    casefolded label phrase, then the label id.
    """
    support = {s for s in range(len(probs)) if probs[s] >= support_threshold}
    covered: set[int] = set()
    remaining = list(range(len(inv.labels)))
    chosen: list[int] = []
    for _ in range(min(n, len(remaining))):
        best_x = None
        best_key = None
        for x in remaining:
            gain = (set(inv.labels[x].intent_ids) & support) - covered
            score = float(sum(probs[s] for s in gain))
            key = (-score, inv.labels[x].phrase.casefold(), x)
            if best_key is None or key < best_key:
                best_key, best_x = key, x
        chosen.append(best_x)
        remaining.remove(best_x)
        covered |= set(inv.labels[best_x].intent_ids) & support
    return tuple(chosen)


def greedy_recommend(baseline: BaselineModel, inv: Inventory, query, n: int) -> Trajectory:
    if baseline.variant != GREEDY:
        raise ValueError(f"expected a greedy baseline, got {baseline.variant!r}")
    probs = baseline.model.probabilities(_query_text(query))
    return greedy_cover_sequence(inv, probs, n, baseline.support_threshold)


# ---------------------------------------------------------------------------
# Supervised
# ---------------------------------------------------------------------------

class SupervisedTarget(NamedTuple):
    trajectory: Trajectory
    reward: float
    exhaustive: bool


EXHAUSTIVE_LIMIT = 12


def supervised_targets(
    inv: Inventory,
    aq: AnnotatedQuery,
    n: int,
    reward_cfg: RewardConfig,
    budget: int = 512,
    rng: np.random.Generator | None = None,
) -> SupervisedTarget:
    """Highest-reward label sequence for one query.

    Exhaustive over all ordered sequences when the candidate pool is small
    (interchangeable labels with identical marginal covers are deduplicated,
    which cannot change the optimum); otherwise the best of a greedy seed
    plus ``budget`` random sequences, flagged non-exhaustive.  Ties on the
    maximum reward are broken with the provided seeded generator.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    cands = sorted(candidate_labels(inv, aq))
    if not cands:
        raise ValueError(f"query {aq.text!r} has no candidate labels")
    n = min(n, len(cands))
    scorer = SequenceScorer(inv, aq, reward_cfg)

    if len(cands) <= EXHAUSTIVE_LIMIT:
        best_seqs, best_r = _exhaustive_best(scorer, cands, n)
        pick = best_seqs[int(rng.integers(len(best_seqs)))]
        return SupervisedTarget(pick, best_r, True)

    pool = [_reward_greedy_sequence(scorer, cands, n)]
    arr = np.array(cands)
    for _ in range(budget):
        pool.append(tuple(int(x) for x in rng.choice(arr, size=n, replace=False)))
    best_r = -math.inf
    best_seqs: list[Trajectory] = []
    for seq in pool:
        r = scorer.score(seq)
        if r > best_r:
            best_r, best_seqs = r, [seq]
        elif r == best_r:
            best_seqs.append(seq)
    pick = best_seqs[int(rng.integers(len(best_seqs)))]
    return SupervisedTarget(pick, best_r, False)


def _exhaustive_best(scorer: SequenceScorer, cands: list[int], n: int, cap: int = 256):
    best_r = -math.inf
    best: list[Trajectory] = []

    def rec(seq: tuple, covered: int, acc: float) -> None:
        nonlocal best_r, best
        if len(seq) == n:
            r = scorer.finish(covered, acc)
            if r > best_r:
                best_r, best = r, [seq]
            elif r == best_r and len(best) < cap:
                best.append(seq)
            return
        seen_covers: set[int] = set()
        for x in cands:
            if x in seq:
                continue
            d = scorer.mask[x] & ~covered
            if d in seen_covers:
                continue  # identical marginal cover: interchangeable below here
            seen_covers.add(d)
            c2, a2 = scorer.step(covered, acc, x)
            rec(seq + (x,), c2, a2)

    rec((), 0, 0.0)
    return best, best_r


def _reward_greedy_sequence(scorer: SequenceScorer, cands: list[int], n: int) -> Trajectory:
    seq: tuple = ()
    covered, acc = 0, 0.0
    remaining = list(cands)
    for _ in range(n):
        best_x, best_r = remaining[0], -math.inf
        for x in remaining:
            c2, a2 = scorer.step(covered, acc, x)
            r = scorer.finish(c2, a2)
            if r > best_r:
                best_x, best_r = x, r
        seq += (best_x,)
        remaining.remove(best_x)
        covered, acc = scorer.step(covered, acc, best_x)
    return seq


def train_supervised(
    corpus: Corpus,
    cfg: TrainConfig,
    reward_cfg: RewardConfig,
    horizon: int = 6,
    model_cfg: ModelConfig | None = None,
    budget: int = 512,
) -> tuple[BaselineModel, TrainingLog]:
    """Teacher-forced cross-entropy on the best-reward sequence per query."""
    inv = corpus.inventory
    vocab = build_token_vocab(corpus)
    model_cfg = model_cfg or ModelConfig(seed=cfg.seed)
    model = PolicyModel(model_cfg, vocab, len(inv.labels), inv.content_hash())
    cfg = replace(cfg, kl_direction=KL_TARGET_TO_MODEL)

    rng = np.random.default_rng(cfg.seed)
    examples: list[PolicyExample] = []
    target_rewards: list[float] = []
    skipped = 0
    for aq in corpus.train:
        if not candidate_labels(inv, aq):
            skipped += 1
            continue
        tgt = supervised_targets(inv, aq, horizon, reward_cfg, budget=budget, rng=rng)
        target_rewards.append(tgt.reward)
        token_ids = tuple(model.token_ids(tokenize(aq.text)))
        cands = candidate_labels(inv, aq)
        for t, x in enumerate(tgt.trajectory):
            pool = cands if cfg.mask_to_candidates else frozenset(range(model.n_labels))
            allowed = tuple(sorted(pool - set(tgt.trajectory[:t])))
            onehot = tuple(1.0 if a == x else 0.0 for a in allowed)
            examples.append(PolicyExample(token_ids, tgt.trajectory[:t], allowed, onehot))
    if skipped:
        logger.warning("supervised: skipped %d queries without candidates", skipped)

    velocity: dict = {}
    log = TrainingLog()
    for epoch in range(cfg.epochs):
        losses = [
            kl_training_step(model, batch, cfg, velocity)
            for batch in iter_batches(examples, cfg.batch_size, rng)
        ]
        log.epochs.append(
            {
                "epoch": epoch,
                "mean_loss": float(np.mean(losses)) if losses else 0.0,
                "mean_target_reward": float(np.mean(target_rewards)) if target_rewards else 0.0,
            }
        )
    return BaselineModel(SUPERVISED, model), log


# ---------------------------------------------------------------------------
# RL without state transitions
# ---------------------------------------------------------------------------

def train_no_state_transition(
    corpus: Corpus,
    cfg: TrainConfig,
    model_cfg: ModelConfig | None = None,
) -> tuple[BaselineModel, TrainingLog]:
    """History-free label classifier on the normalized label-relevance mass."""
    inv = corpus.inventory
    vocab = build_token_vocab(corpus)
    model_cfg = model_cfg or ModelConfig(seed=cfg.seed)
    model = ClassifierModel(model_cfg, vocab, len(inv.labels), inv.content_hash())

    examples = []
    for aq in corpus.train:
        probs = intent_probabilities(aq)
        target = np.zeros(len(inv.labels))
        for lab in inv.labels:
            target[lab.id] = sum(probs.get(s, 0.0) for s in lab.intent_ids)
        total = target.sum()
        if total <= 0:
            logger.warning("skipping query %r: no label touches its intents", aq.text)
            continue
        examples.append(
            ClassifierExample(tuple(model.token_ids(tokenize(aq.text))), tuple(target / total))
        )

    rng = np.random.default_rng(cfg.seed)
    velocity: dict = {}
    log = TrainingLog()
    for epoch in range(cfg.epochs):
        losses = [
            kl_training_step(model, batch, cfg, velocity)
            for batch in iter_batches(examples, cfg.batch_size, rng)
        ]
        log.epochs.append({"epoch": epoch, "mean_loss": float(np.mean(losses)) if losses else 0.0})
    return BaselineModel(NO_STATE_TRANSITION, model), log
