"""Trajectory reward: coverage, per-step conditional entropies, and information gain.

A trajectory is an ordered tuple of distinct label ids.  Its reward is the
probability mass of the covered potential intents plus a weighted
information-gain term that scores how well the labels partition the
potential-intent set.

Two sign conventions for the gain are provided.  ``paper`` keeps the printed
formula (weighted step entropies minus the base entropy, which is maximal for
one broad covering label); ``id3`` flips the sign so that discriminating
partitions score highest, matching the decision-tree notion of gain.  Both
are exposed because the printed formula and its stated motivation disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .inventory import AnnotatedQuery, IntentId, Inventory, LabelId, intent_probabilities

PAPER = "paper"
ID3 = "id3"
_CONVENTIONS = (PAPER, ID3)

Trajectory = tuple[LabelId, ...]

DEFAULT_MAX_LEN = 6


class UnknownLabelError(KeyError):
    """A trajectory references a label id outside the inventory."""


def validate_trajectory(tau: Sequence[LabelId], max_len: int | None = DEFAULT_MAX_LEN) -> Trajectory:
    """Check distinctness and length bounds, returning the canonical tuple."""
    tau = tuple(tau)
    if len(set(tau)) != len(tau):
        raise ValueError(f"trajectory labels must be pairwise distinct: {tau}")
    if not tau:
        raise ValueError("trajectory must contain at least one label")
    if max_len is not None and len(tau) > max_len:
        raise ValueError(f"trajectory length {len(tau)} exceeds maximum {max_len}")
    return tau


def _label_cover(inv: Inventory, aq: AnnotatedQuery, x: LabelId) -> frozenset[IntentId]:
    if not 0 <= x < len(inv.labels):
        raise UnknownLabelError(f"label id {x} not in inventory (|labels|={len(inv.labels)})")
    return inv.labels[x].intent_ids & aq.potential_intents


def covered_set(inv: Inventory, aq: AnnotatedQuery, tau: Iterable[LabelId]) -> frozenset[IntentId]:
    """Union over the trajectory of each label's potential-intent cover."""
    out: set[IntentId] = set()
    for x in tau:
        out |= _label_cover(inv, aq, x)
    return frozenset(out)


def marginal_cover(
    inv: Inventory, aq: AnnotatedQuery, prefix: Iterable[LabelId], x: LabelId
) -> frozenset[IntentId]:
    """Potential intents newly covered by ``x`` after the prefix: (M(x) ∩ potential) − already covered."""
    return _label_cover(inv, aq, x) - covered_set(inv, aq, prefix)


def step_entropy(aq: AnnotatedQuery, cover: Iterable[IntentId]) -> float:
    """Entropy (nats) of the answer distribution renormalized onto one marginal cover.

    Covers of size zero or one carry no uncertainty and return 0; the empty
    cover is a limit convention (its normalizer vanishes).
    """
    cover = frozenset(cover)
    if not cover <= aq.potential_intents:
        raise ValueError("cover must be a subset of the potential intents")
    if len(cover) <= 1:
        return 0.0
    probs = intent_probabilities(aq)
    denom = sum(probs[s] for s in cover)
    h = 0.0
    for s in cover:
        p = probs[s] / denom
        h -= p * math.log(p)
    return h


def base_entropy(aq: AnnotatedQuery) -> float:
    """Entropy (nats) of the answer distribution before any label is shown."""
    probs = intent_probabilities(aq)
    return -sum(p * math.log(p) for p in probs.values())


def _gain_parts(
    inv: Inventory, aq: AnnotatedQuery, tau: Sequence[LabelId]
) -> tuple[list[frozenset[IntentId]], list[float], frozenset[IntentId], float]:
    covers: list[frozenset[IntentId]] = []
    entropies: list[float] = []
    covered: set[IntentId] = set()
    for x in tau:
        d = _label_cover(inv, aq, x) - covered
        covers.append(frozenset(d))
        entropies.append(step_entropy(aq, d))
        covered |= d
    total = frozenset(covered)
    if total:
        weighted = sum(len(d) / len(total) * h for d, h in zip(covers, entropies))
    else:
        weighted = 0.0  # empty union: the weighted sum is an empty sum
    return covers, entropies, total, weighted


def information_gain(
    inv: Inventory,
    aq: AnnotatedQuery,
    tau: Sequence[LabelId],
    convention: str = PAPER,
) -> float:
    """Weighted step entropies against the base entropy, sign per convention."""
    if convention not in _CONVENTIONS:
        raise ValueError(f"convention must be one of {_CONVENTIONS}, got {convention!r}")
    _, _, _, weighted = _gain_parts(inv, aq, tau)
    h0 = base_entropy(aq)
    return weighted - h0 if convention == PAPER else h0 - weighted


@dataclass(frozen=True)
class RewardConfig:
    beta: float = 1.0
    convention: str = PAPER

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.convention not in _CONVENTIONS:
            raise ValueError(f"convention must be one of {_CONVENTIONS}")


@dataclass(frozen=True)
class RewardBreakdown:
    """Full decomposition of one trajectory's reward."""

    covered: frozenset[IntentId]
    marginal_covers: tuple[frozenset[IntentId], ...]
    step_entropies: tuple[float, ...]
    base_entropy: float
    info_gain: float
    recall_mass: float
    total: float
    beta: float
    convention: str

    def to_dict(self) -> dict:
        return {
            "covered": sorted(self.covered),
            "marginal_covers": [sorted(d) for d in self.marginal_covers],
            "step_entropies": list(self.step_entropies),
            "base_entropy": self.base_entropy,
            "info_gain": self.info_gain,
            "recall_mass": self.recall_mass,
            "total": self.total,
            "beta": self.beta,
            "convention": self.convention,
        }


def trajectory_reward(
    inv: Inventory,
    aq: AnnotatedQuery,
    tau: Sequence[LabelId],
    beta: float = 1.0,
    convention: str = PAPER,
) -> RewardBreakdown:
    """Recall mass plus beta-weighted information gain, with the full breakdown."""
    cfg = RewardConfig(beta=beta, convention=convention)
    covers, entropies, covered, weighted = _gain_parts(inv, aq, tau)
    h0 = base_entropy(aq)
    gain = weighted - h0 if cfg.convention == PAPER else h0 - weighted
    probs = intent_probabilities(aq)
    recall_mass = sum(probs[s] for s in covered)
    return RewardBreakdown(
        covered=covered,
        marginal_covers=tuple(covers),
        step_entropies=tuple(entropies),
        base_entropy=h0,
        info_gain=gain,
        recall_mass=recall_mass,
        total=recall_mass + cfg.beta * gain,
        beta=cfg.beta,
        convention=cfg.convention,
    )


class SequenceScorer:
    """Bitmask fast path for scoring many trajectories of one query.

    Used by the tree search and the exhaustive enumerators, where the
    set-based formula path above would dominate the runtime.  Covers are
    integers with one bit per potential intent; the answer distribution is
    uniform, so every step entropy is the log of the marginal-cover size.
    """

    __slots__ = ("q_size", "beta", "convention", "h0", "mask", "_log")

    def __init__(self, inv: Inventory, aq: AnnotatedQuery, cfg: RewardConfig):
        order = sorted(aq.potential_intents)
        pos = {s: i for i, s in enumerate(order)}
        self.q_size = len(order)
        self.beta = cfg.beta
        self.convention = cfg.convention
        self.h0 = math.log(self.q_size)
        self.mask: dict[LabelId, int] = {}
        for lab in inv.labels:
            m = 0
            for s in lab.intent_ids:
                if s in pos:
                    m |= 1 << pos[s]
            self.mask[lab.id] = m
        self._log = [0.0] + [math.log(k) for k in range(1, self.q_size + 1)]

    def cover_mask(self, x: LabelId) -> int:
        return self.mask[x]

    def covered_count(self, labels: Iterable[LabelId]) -> int:
        covered = 0
        for x in labels:
            covered |= self.mask[x]
        return covered.bit_count()

    def step(self, covered: int, acc: float, x: LabelId) -> tuple[int, float]:
        """Fold one label into the running (covered mask, entropy accumulator) state."""
        d = self.mask[x] & ~covered
        c = d.bit_count()
        if c > 1:
            acc += c * self._log[c]
        return covered | d, acc

    def finish(self, covered: int, acc: float) -> float:
        """Total reward from an accumulated state."""
        s = covered.bit_count()
        recall_mass = s / self.q_size
        weighted = acc / s if s else 0.0
        gain = weighted - self.h0 if self.convention == PAPER else self.h0 - weighted
        return recall_mass + self.beta * gain

    def score(self, labels: Iterable[LabelId]) -> float:
        covered = 0
        acc = 0.0
        for x in labels:
            covered, acc = self.step(covered, acc, x)
        return self.finish(covered, acc)
