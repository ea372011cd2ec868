"""Self-play training of the recommendation policy.

Each epoch rolls one tree-search episode per training query, collects the
per-step visit-count targets, and fits the network by minimizing the KL
divergence of its action distribution to those targets with SGD + momentum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..inventory import Corpus, Inventory, candidate_labels, tokenize
from ..reward import RewardConfig, SequenceScorer
from ..search import NoCandidatesError, SearchConfig, self_play_episode
from .model import ClassifierModel, ModelConfig, PolicyModel, TrainingError

logger = logging.getLogger(__name__)

KL_MODEL_TO_TARGET = "model_to_target"  # D_KL(z || pi), the printed direction
KL_TARGET_TO_MODEL = "target_to_model"  # D_KL(pi || z), cross-entropy style


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    lr: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32
    clip_norm: float = 5.0
    episodes_per_epoch: int | None = None
    mask_to_candidates: bool = True
    kl_direction: str = KL_MODEL_TO_TARGET
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.kl_direction not in (KL_MODEL_TO_TARGET, KL_TARGET_TO_MODEL):
            raise ValueError(f"unknown kl_direction {self.kl_direction!r}")


@dataclass(frozen=True)
class PolicyExample:
    """One training pair: encoded state plus the target distribution."""

    token_ids: tuple[int, ...]
    history: tuple[int, ...]
    allowed: tuple[int, ...]
    target: tuple[float, ...]  # aligned with ``allowed``


@dataclass(frozen=True)
class ClassifierExample:
    token_ids: tuple[int, ...]
    target: tuple[float, ...]  # over the classifier's full output space


@dataclass
class TrainingLog:
    epochs: list[dict] = field(default_factory=list)

    def last(self, key: str) -> float:
        return self.epochs[-1][key]


def build_token_vocab(corpus: Corpus) -> dict[str, int]:
    """Token ids from label phrases, intent texts, and training queries."""
    tokens: set[str] = set()
    for lab in corpus.inventory.labels:
        tokens.update(tokenize(lab.phrase))
    for intent in corpus.inventory.intents:
        tokens.update(tokenize(intent.text))
    for q in corpus.train:
        tokens.update(tokenize(q.text))
    return {t: i for i, t in enumerate(sorted(tokens))}


def _loss_and_dlogits(z, logz, target, direction, eps):
    pt = np.asarray(target, dtype=float) + eps
    pt = pt / pt.sum()
    if direction == KL_MODEL_TO_TARGET:
        diff = logz - np.log(pt)
        kl = float(z @ diff)
        return kl, z * (diff - kl)
    kl = float(pt @ (np.log(pt) - logz))
    return kl, z - pt


def policy_loss_and_grads(model: PolicyModel, batch: list[PolicyExample], cfg: TrainConfig):
    """Mean KL loss over the batch and its parameter gradients (no update)."""
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    scale = 1.0 / len(batch)
    for ex in batch:
        z, cache = model.forward_state(list(ex.token_ids), ex.history, list(ex.allowed))
        loss, dlogits = _loss_and_dlogits(z, cache["logz"], ex.target, cfg.kl_direction, cfg.epsilon)
        total += loss * scale
        for k, g in model.backward_state(cache, dlogits * scale).items():
            grads[k] += g
    return total, grads


def classifier_loss_and_grads(model: ClassifierModel, batch: list[ClassifierExample], cfg: TrainConfig):
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    scale = 1.0 / len(batch)
    for ex in batch:
        z, cache = model.forward_state(list(ex.token_ids))
        loss, dlogits = _loss_and_dlogits(z, cache["logz"], ex.target, cfg.kl_direction, cfg.epsilon)
        total += loss * scale
        for k, g in model.backward_state(cache, dlogits * scale).items():
            grads[k] += g
    return total, grads


def _apply_update(model, grads: dict, cfg: TrainConfig, velocity: dict) -> None:
    norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if not np.isfinite(norm):
        raise TrainingError(f"non-finite gradient norm {norm}")
    if cfg.clip_norm and norm > cfg.clip_norm:
        scale = cfg.clip_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    for k, g in grads.items():
        v = velocity.setdefault(k, np.zeros_like(g))
        v *= cfg.momentum
        v += g
        model.params[k] -= cfg.lr * v


def kl_training_step(model, batch, cfg: TrainConfig, velocity: dict | None = None) -> float:
    """One gradient step; returns the pre-update loss.

    Works for both the sequence policy and the classifiers, dispatching on
    the example type.
    """
    if not batch:
        raise ValueError("empty batch")
    if velocity is None:
        velocity = {}
    if isinstance(batch[0], PolicyExample):
        loss, grads = policy_loss_and_grads(model, batch, cfg)
    else:
        loss, grads = classifier_loss_and_grads(model, batch, cfg)
    if not np.isfinite(loss):
        raise TrainingError(
            f"non-finite loss {loss} on batch of {len(batch)} "
            f"(first state history={getattr(batch[0], 'history', ())!r})"
        )
    _apply_update(model, grads, cfg, velocity)
    return loss


def iter_batches(examples: list, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(len(examples))
    for start in range(0, len(examples), batch_size):
        yield [examples[i] for i in order[start : start + batch_size]]


def episode_examples(
    model: PolicyModel,
    inv: Inventory,
    aq,
    steps,
    mask_to_candidates: bool,
) -> list[PolicyExample]:
    """Turn one episode's search targets into aligned training examples."""
    token_ids = tuple(model.token_ids(tokenize(aq.text)))
    cands = candidate_labels(inv, aq)
    out = []
    for step in steps:
        pool = cands if mask_to_candidates else frozenset(range(model.n_labels))
        allowed = tuple(sorted(pool - set(step.prefix)))
        target = tuple(step.pi.get(x, 0.0) for x in allowed)
        out.append(PolicyExample(token_ids, tuple(step.prefix), allowed, target))
    return out


def train_policy(
    corpus: Corpus,
    search_cfg: SearchConfig,
    train_cfg: TrainConfig,
    reward_cfg: RewardConfig,
    model_cfg: ModelConfig | None = None,
    checkpoint_dir=None,
) -> tuple[PolicyModel, TrainingLog]:
    """Self-play training loop; checkpoints per epoch when a directory is given."""
    from .checkpoint import save_checkpoint  # local import to avoid a cycle

    inv = corpus.inventory
    vocab = build_token_vocab(corpus)
    model_cfg = model_cfg or ModelConfig(seed=train_cfg.seed)
    model = PolicyModel(model_cfg, vocab, len(inv.labels), inv.content_hash())
    rng = np.random.default_rng(train_cfg.seed)
    velocity: dict = {}
    log = TrainingLog()
    train_queries = corpus.train
    if not train_queries:
        raise ValueError("corpus has no training split")

    for epoch in range(train_cfg.epochs):
        if train_cfg.episodes_per_epoch and train_cfg.episodes_per_epoch < len(train_queries):
            picks = rng.choice(len(train_queries), train_cfg.episodes_per_epoch, replace=False)
            queries = [train_queries[i] for i in sorted(picks)]
        else:
            queries = train_queries

        examples: list[PolicyExample] = []
        rewards: list[float] = []
        skipped = 0
        for qi, aq in enumerate(queries):
            ep_rng = np.random.default_rng(
                np.random.SeedSequence([train_cfg.seed, epoch, qi])
            )
            try:
                steps, tau = self_play_episode(inv, aq, search_cfg, reward_cfg, rng=ep_rng)
            except NoCandidatesError:
                skipped += 1
                continue
            rewards.append(SequenceScorer(inv, aq, reward_cfg).score(tau))
            examples.extend(episode_examples(model, inv, aq, steps, train_cfg.mask_to_candidates))
        if skipped:
            logger.warning("epoch %d: skipped %d queries without candidate labels", epoch, skipped)

        losses = [
            kl_training_step(model, batch, train_cfg, velocity)
            for batch in iter_batches(examples, train_cfg.batch_size, rng)
        ]
        record = {
            "epoch": epoch,
            "mean_reward": float(np.mean(rewards)) if rewards else 0.0,
            "mean_loss": float(np.mean(losses)) if losses else 0.0,
            "episodes": len(rewards),
            "skipped": skipped,
        }
        log.epochs.append(record)
        logger.info("epoch %(epoch)d reward=%(mean_reward).4f loss=%(mean_loss).4f", record)
        if checkpoint_dir is not None:
            save_checkpoint(model, f"{checkpoint_dir}/policy-epoch{epoch}.ckpt")
    return model, log
