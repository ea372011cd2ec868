"""Monte-Carlo tree search over label sequences.

Each search runs from a recommendation prefix: simulations descend the tree
by maximal upper-confidence value, expanding unvisited actions in a seeded
random order, until the trajectory reaches the configured length.  Completed
trajectories are scored by the trajectory reward and their totals accumulate
into per-node sums, so a node's value estimate is the mean reward of the
trajectories through it.  The returned policy is the temperature-scaled
visit-count distribution over root actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .inventory import AnnotatedQuery, Inventory, LabelId, candidate_labels
from .reward import RewardConfig, SequenceScorer, Trajectory


class NoCandidatesError(RuntimeError):
    """No label intersects the query's potential intents."""


@dataclass(frozen=True)
class SearchConfig:
    simulations: int = 1000
    horizon: int = 6
    beta_t: float = 1.0
    temperature: float = 1.0
    dirichlet_alpha: float = 0.03
    noise_weight: float = 0.25
    seed: int = 0

    def __post_init__(self) -> None:
        if self.simulations < 1:
            raise ValueError("simulations must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0.0 <= self.noise_weight <= 1.0:
            raise ValueError("noise_weight must be within [0, 1]")


class SearchNode:
    """One node of the search tree; the root carries no label."""

    __slots__ = ("label", "visit_count", "total_reward", "children", "parent", "untried")

    def __init__(self, label: LabelId | None = None, parent: "SearchNode | None" = None):
        self.label = label
        self.visit_count = 0
        self.total_reward = 0.0
        self.children: dict[LabelId, SearchNode] = {}
        self.parent = parent
        self.untried: list[LabelId] | None = None  # filled lazily, pre-shuffled

    @property
    def mean_reward(self) -> float:
        return self.total_reward / self.visit_count if self.visit_count else 0.0


@dataclass
class SearchPolicy:
    """Visit-count policy at one step, plus search byproducts."""

    pi: dict[LabelId, float]
    best_trajectory: Trajectory
    best_reward: float
    root: SearchNode = field(repr=False)
    sampled_action: LabelId | None = None
    sampling_distribution: dict[LabelId, float] | None = None


def ucb_value(node: SearchNode, parent_visits: int, beta_t: float) -> float:
    """Mean reward plus the exploration bonus; unvisited nodes sort first."""
    if parent_visits < 1:
        raise ValueError("parent_visits must be >= 1")
    if node.visit_count == 0:
        return math.inf
    exploit = node.total_reward / node.visit_count
    return exploit + beta_t * math.sqrt(2.0 * math.log(parent_visits) / node.visit_count)


def _visit_policy(root: SearchNode, temperature: float) -> dict[LabelId, float]:
    items = sorted(root.children.items())
    if temperature == 0.0:
        best = max(items, key=lambda kv: (kv[1].visit_count, -kv[0]))[0]
        return {x: (1.0 if x == best else 0.0) for x, _ in items}
    # work in log space so small temperatures do not overflow
    logits = [math.log(node.visit_count) / temperature for _, node in items]
    top = max(logits)
    weights = [math.exp(l - top) for l in logits]
    z = sum(weights)
    return {x: w / z for (x, _), w in zip(items, weights)}


def run_search(
    inv: Inventory,
    aq: AnnotatedQuery,
    prefix: Trajectory,
    cfg: SearchConfig,
    reward_cfg: RewardConfig,
    rng: np.random.Generator | None = None,
) -> SearchPolicy:
    """Run the configured number of simulations from ``prefix`` and return the policy."""
    prefix = tuple(prefix)
    if len(prefix) >= cfg.horizon:
        raise ValueError(f"prefix length {len(prefix)} must be below the horizon {cfg.horizon}")
    cands = sorted(candidate_labels(inv, aq) - set(prefix))
    if not cands:
        raise NoCandidatesError(f"no candidate labels for query {aq.text!r}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    scorer = SequenceScorer(inv, aq, reward_cfg)
    root = SearchNode()
    target_depth = cfg.horizon - len(prefix)
    best_traj: Trajectory = ()
    best_reward = -math.inf

    for _ in range(cfg.simulations):
        node = root
        path = [root]
        used = set(prefix)
        while len(path) - 1 < target_depth:
            if node.untried is None:
                remaining = [x for x in cands if x not in used]
                order = rng.permutation(len(remaining))
                node.untried = [remaining[i] for i in order]
            if node.untried:
                x = node.untried.pop()
                child = SearchNode(x, parent=node)
                node.children[x] = child
            elif node.children:
                parent_visits = node.visit_count
                child = None
                child_best = -math.inf
                for c in node.children.values():
                    v = ucb_value(c, parent_visits, cfg.beta_t)
                    if v > child_best:
                        child, child_best = c, v
            else:
                break  # dead end: every candidate already on the path
            used.add(child.label)
            path.append(child)
            node = child

        tau = prefix + tuple(n.label for n in path[1:])
        reward = scorer.score(tau)
        if reward > best_reward:
            best_traj, best_reward = tau, reward
        for n in path:
            n.visit_count += 1
            n.total_reward += reward

    return SearchPolicy(
        pi=_visit_policy(root, cfg.temperature),
        best_trajectory=best_traj,
        best_reward=best_reward,
        root=root,
    )


def sample_action(
    pi: SearchPolicy,
    cfg: SearchConfig,
    rng: np.random.Generator,
    mode: str = "train",
) -> LabelId:
    """Pick the next label from a search policy.

    Training mixes the visit policy with symmetric Dirichlet noise over the
    root actions and samples from the mixture; inference takes the argmax
    (smallest label id on ties).
    """
    if not pi.pi:
        raise ValueError("empty search policy")
    labels = sorted(pi.pi)
    if mode == "inference":
        chosen = max(labels, key=lambda x: (pi.pi[x], -x))
        pi.sampled_action = chosen
        return chosen
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'inference', got {mode!r}")
    probs = np.array([pi.pi[x] for x in labels], dtype=float)
    noise = rng.dirichlet(np.full(len(labels), cfg.dirichlet_alpha))
    mixed = (1.0 - cfg.noise_weight) * probs + cfg.noise_weight * noise
    mixed = mixed / mixed.sum()
    chosen = labels[int(rng.choice(len(labels), p=mixed))]
    pi.sampling_distribution = dict(zip(labels, mixed.tolist()))
    pi.sampled_action = chosen
    return chosen


@dataclass(frozen=True)
class EpisodeStep:
    """One training pair: the state (query + prefix) and the search target."""

    query_text: str
    prefix: Trajectory
    pi: dict[LabelId, float]


def self_play_episode(
    inv: Inventory,
    aq: AnnotatedQuery,
    cfg: SearchConfig,
    reward_cfg: RewardConfig,
    rng: np.random.Generator | None = None,
) -> tuple[list[EpisodeStep], Trajectory]:
    """Roll one full episode: a fresh search per step, then a noisy sample.

    Returns one training pair per step and the terminal trajectory.  Episodes
    end early only when the candidate pool is exhausted.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    cands = candidate_labels(inv, aq)
    if not cands:
        raise NoCandidatesError(f"no candidate labels for query {aq.text!r}")
    prefix: Trajectory = ()
    steps: list[EpisodeStep] = []
    while len(prefix) < cfg.horizon and cands - set(prefix):
        policy = run_search(inv, aq, prefix, cfg, reward_cfg, rng=rng)
        steps.append(EpisodeStep(aq.text, prefix, dict(policy.pi)))
        prefix = prefix + (sample_action(policy, cfg, rng, mode="train"),)
    return steps, prefix
