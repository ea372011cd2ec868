"""Independent brute-force evaluators the implementation is checked against.

Everything here is a direct transliteration of the defining formulas using
plain sets and rational arithmetic where possible, written without reference
to the production code paths.
"""

from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

from clarify.inventory import AnnotatedQuery, Intent, Inventory, Label


def oracle_candidates(inv: Inventory, aq: AnnotatedQuery) -> set[int]:
    out = set()
    for lab in inv.labels:
        if set(lab.intent_ids) & set(aq.potential_intents):
            out.add(lab.id)
    return out


def oracle_reward(inv, aq, tau, beta=1.0, convention="paper") -> float:
    """Recall mass + beta * gain, evaluated with Fractions for all probabilities."""
    qset = set(aq.potential_intents)
    prob = {s: Fraction(1, len(qset)) for s in qset}

    covered: set[int] = set()
    marginals: list[set[int]] = []
    for x in tau:
        d = (set(inv.labels[x].intent_ids) & qset) - covered
        marginals.append(d)
        covered |= d

    def entropy(d: set[int]) -> float:
        if len(d) <= 1:
            return 0.0
        denom = sum(prob[s] for s in d)
        h = 0.0
        for s in d:
            p = prob[s] / denom
            h -= float(p) * math.log(float(p))
        return h

    h0 = -sum(float(p) * math.log(float(p)) for p in prob.values())
    if covered:
        weighted = sum(
            float(Fraction(len(d), len(covered))) * entropy(d) for d in marginals
        )
    else:
        weighted = 0.0
    gain = weighted - h0 if convention == "paper" else h0 - weighted
    recall = float(sum(prob[s] for s in covered))
    return recall + beta * gain


def oracle_best_sequence(inv, aq, candidates, n, beta, convention):
    """Exhaustive maximum over all ordered length-n sequences of candidates."""
    best, best_r = None, -math.inf
    n = min(n, len(candidates))
    for seq in itertools.permutations(sorted(candidates), n):
        r = oracle_reward(inv, aq, seq, beta, convention)
        if r > best_r:
            best, best_r = seq, r
    return best, best_r


def oracle_max_coverage(inv, aq, candidates, n) -> int:
    """Exact max-coverage count by enumerating label subsets of size <= n."""
    qset = set(aq.potential_intents)
    covers = [set(inv.labels[x].intent_ids) & qset for x in sorted(candidates)]
    best = 0
    n = min(n, len(covers))
    for combo in itertools.combinations(range(len(covers)), n):
        u: set[int] = set()
        for i in combo:
            u |= covers[i]
        best = max(best, len(u))
    return best


def make_random_instance(
    rng: random.Random,
    max_intents: int = 10,
    max_labels: int = 8,
    seed_texts: bool = False,
):
    """A small random inventory plus one annotated query over it."""
    n_int = rng.randint(2, max_intents)
    n_lab = rng.randint(1, max_labels)
    intents = [Intent(i, f"intent {i}", f"answer {i}") for i in range(n_int)]
    labels = []
    for j in range(n_lab):
        size = rng.randint(1, n_int)
        members = frozenset(rng.sample(range(n_int), size))
        labels.append(Label(j, f"label {j}", members))
    inv = Inventory(intents=intents, labels=labels)
    q_size = rng.randint(1, n_int)
    qset = frozenset(rng.sample(range(n_int), q_size))
    aq = AnnotatedQuery(f"query {rng.randrange(10**6)}", qset, "train")
    return inv, aq


def random_distinct_sequence(rng: random.Random, pool, max_len: int):
    n = rng.randint(1, min(max_len, len(pool)))
    return tuple(rng.sample(sorted(pool), n))
