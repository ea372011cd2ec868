"""Offline metrics, complementarity metrics, and the simulated online experiment.

Recall@N is reported union-based (fraction of potential intents covered by
the recommended labels); the printed sum-of-intersections variant, which can
exceed 1 with overlapping labels, stays available as ``variant="sum"``.  The
upper bound is the best achievable N-label coverage per query.

The online simulator replays clarification sessions against seeded click
models; it shares its per-session plan with the live service tests so both
paths can be compared counter-for-counter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Protocol, Sequence

import numpy as np

from .inventory import (
    AnnotatedQuery,
    Corpus,
    IntentId,
    Inventory,
    LabelId,
    candidate_labels,
    tokenize,
)
from .reward import Trajectory, covered_set
from .service import RetrievalIndex, retrieve

UNION = "union"
SUM = "sum"


class Recommender(Protocol):
    inventory_hash: str

    def recommend(self, inv: Inventory, query_text: str, n: int) -> Trajectory: ...


class InventoryMismatchError(ValueError):
    """Checkpoint was trained against a different inventory."""


def recall_at_n(inv: Inventory, aq: AnnotatedQuery, tau: Sequence[LabelId], variant: str = UNION) -> float:
    """Fraction of the potential intents retrieved by the trajectory.

    ``sum`` reproduces the printed formula (intersection sizes summed, so
    overlapping labels count twice); ``union`` is the reported default.
    """
    qsize = len(aq.potential_intents)
    if variant == UNION:
        return len(covered_set(inv, aq, tau)) / qsize
    if variant == SUM:
        total = sum(len(inv.labels[x].intent_ids & aq.potential_intents) for x in tau)
        return total / qsize
    raise ValueError(f"variant must be '{UNION}' or '{SUM}', got {variant!r}")


class UpperBoundResult(NamedTuple):
    value: float
    exact: bool


EXACT_COVER_LIMIT = 20


def upper_bound(inv: Inventory, aq: AnnotatedQuery, n: int) -> UpperBoundResult:
    """Best achievable union recall with n labels from the candidate pool.

    Exact branch-and-bound over distinct label covers when there are at most
    20 of them; the standard greedy max-coverage approximation otherwise
    (flagged via ``exact=False``).
    """
    order = sorted(aq.potential_intents)
    pos = {s: i for i, s in enumerate(order)}
    qsize = len(order)
    covers: set[int] = set()
    for x in candidate_labels(inv, aq):
        m = 0
        for s in inv.labels[x].intent_ids:
            if s in pos:
                m |= 1 << pos[s]
        covers.add(m)
    masks = sorted(covers, key=lambda m: -m.bit_count())
    if not masks:
        return UpperBoundResult(0.0, True)
    n = min(n, len(masks))

    if len(masks) <= EXACT_COVER_LIMIT:
        sizes = [m.bit_count() for m in masks]
        best = 0

        def rec(i: int, covered: int, left: int) -> None:
            nonlocal best
            count = covered.bit_count()
            best = max(best, count)
            if left == 0 or i == len(masks) or count == qsize:
                return
            if count + sum(sizes[i : i + left]) <= best:
                return  # even disjoint additions cannot beat the incumbent
            rec(i + 1, covered | masks[i], left - 1)
            rec(i + 1, covered, left)

        rec(0, 0, n)
        return UpperBoundResult(best / qsize, True)

    covered = 0
    for _ in range(n):
        gain, pick = 0, None
        for m in masks:
            g = (m & ~covered).bit_count()
            if g > gain:
                gain, pick = g, m
        if pick is None:
            break
        covered |= pick
    return UpperBoundResult(covered.bit_count() / qsize, False)


def _phrase_token_counts(inv: Inventory, tau: Sequence[LabelId], tokenizer: str):
    per_phrase = [tokenize(inv.labels[x].phrase, tokenizer) for x in tau]
    counts: dict[str, int] = {}
    for toks in per_phrase:
        for t in toks:
            counts[t] = counts.get(t, 0) + 1
    return per_phrase, counts


def diversity(tau: Sequence[LabelId], inv: Inventory, tokenizer: str = "whitespace") -> float:
    """Distinct tokens over total token occurrences across the label phrases."""
    if not tau:
        raise ValueError("diversity needs a non-empty trajectory")
    _, counts = _phrase_token_counts(inv, tau, tokenizer)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("trajectory phrases produced no tokens")
    return len(counts) / total


def overlap(
    tau: Sequence[LabelId],
    query_text: str,
    inv: Inventory,
    tokenizer: str = "whitespace",
) -> float:
    """Occurrence-weighted share of label tokens that also appear in the query."""
    if not tau:
        raise ValueError("overlap needs a non-empty trajectory")
    per_phrase, counts = _phrase_token_counts(inv, tau, tokenizer)
    query_tokens = set(tokenize(query_text, tokenizer))
    num = 0
    den = 0
    for toks in per_phrase:
        distinct = set(toks)
        den += sum(counts[t] for t in distinct)
        num += sum(counts[t] for t in distinct & query_tokens)
    return num / den if den else 0.0


# ---------------------------------------------------------------------------
# Offline report
# ---------------------------------------------------------------------------

@dataclass
class OfflineReport:
    corpus_seed: int
    inventory_hash: str
    split: str
    n_values: tuple[int, ...]
    methods: dict[str, dict[str, float]]
    upper_bounds: dict[int, float]
    upper_bound_exact_fraction: dict[int, float]
    per_query: list[dict] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "corpus_seed": self.corpus_seed,
            "inventory_hash": self.inventory_hash,
            "split": self.split,
            "n_values": list(self.n_values),
            "methods": self.methods,
            "upper_bounds": {str(k): v for k, v in self.upper_bounds.items()},
            "upper_bound_exact_fraction": {
                str(k): v for k, v in self.upper_bound_exact_fraction.items()
            },
            "per_query": self.per_query,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self) -> list[list]:
        rows = [["method", "n", "recall_union", "recall_sum", "upper_bound"]]
        for name in sorted(self.methods):
            for n in self.n_values:
                rows.append(
                    [
                        name,
                        n,
                        self.methods[name][f"recall_union@{n}"],
                        self.methods[name][f"recall_sum@{n}"],
                        self.upper_bounds[n],
                    ]
                )
        return rows

    def text_table(self) -> str:
        lines = [f"{'method':<24}" + "".join(f"recall@{n:<9}" for n in self.n_values)]
        for name in sorted(self.methods):
            cells = "".join(
                f"{self.methods[name][f'recall_union@{n}']:<16.4f}" for n in self.n_values
            )
            lines.append(f"{name:<24}{cells}")
        cells = "".join(f"{self.upper_bounds[n]:<16.4f}" for n in self.n_values)
        lines.append(f"{'upper bound':<24}{cells}")
        return "\n".join(lines)


def _check_inventory(obj, inv: Inventory) -> None:
    tag = getattr(obj, "inventory_hash", "")
    if tag and tag != inv.content_hash():
        raise InventoryMismatchError(
            f"checkpoint inventory hash {tag[:12]}... does not match corpus inventory"
        )


def run_offline_eval(
    methods: dict[str, Recommender],
    corpus: Corpus,
    n_values: Sequence[int] = (3, 6),
    split: str = "test",
) -> OfflineReport:
    """Mean union recall per method and n, against the per-query upper bound."""
    inv = corpus.inventory
    queries = corpus.test if split == "test" else corpus.train
    if not queries:
        raise ValueError(f"corpus has no {split} queries")
    for obj in methods.values():
        _check_inventory(obj, inv)

    n_values = tuple(n_values)
    per_query: list[dict] = []
    sums: dict[str, dict[str, float]] = {
        name: {f"recall_{v}@{n}": 0.0 for n in n_values for v in (UNION, SUM)}
        for name in methods
    }
    ub_sum = {n: 0.0 for n in n_values}
    ub_exact = {n: 0 for n in n_values}
    for aq in queries:
        row: dict = {"query": aq.text, "potential_intents": len(aq.potential_intents)}
        for n in n_values:
            ub = upper_bound(inv, aq, n)
            ub_sum[n] += ub.value
            ub_exact[n] += int(ub.exact)
            row[f"upper_bound@{n}"] = ub.value
            row[f"upper_bound_exact@{n}"] = ub.exact
        for name, model in methods.items():
            tau = model.recommend(inv, aq.text, max(n_values))
            for n in n_values:
                for variant in (UNION, SUM):
                    r = recall_at_n(inv, aq, tau[:n], variant)
                    sums[name][f"recall_{variant}@{n}"] += r
                row[f"{name}@{n}"] = recall_at_n(inv, aq, tau[:n], UNION)
        per_query.append(row)

    count = len(queries)
    return OfflineReport(
        corpus_seed=corpus.seed,
        inventory_hash=inv.content_hash(),
        split=split,
        n_values=n_values,
        methods={
            name: {k: v / count for k, v in vals.items()} for name, vals in sums.items()
        },
        upper_bounds={n: ub_sum[n] / count for n in n_values},
        upper_bound_exact_fraction={n: ub_exact[n] / count for n in n_values},
        per_query=per_query,
    )


@dataclass
class ComplementarityReport:
    tokenizer: str
    methods: dict[str, dict[str, float]]  # name -> {"diversity": .., "overlap": ..}

    def to_dict(self) -> dict:
        return {"tokenizer": self.tokenizer, "methods": self.methods}

    def csv_rows(self) -> list[list]:
        rows = [["method", "diversity", "overlap"]]
        for name in sorted(self.methods):
            rows.append([name, self.methods[name]["diversity"], self.methods[name]["overlap"]])
        return rows


def complementarity_report(
    methods: dict[str, Recommender],
    corpus: Corpus,
    n: int = 6,
    tokenizer: str = "whitespace",
    split: str = "test",
) -> ComplementarityReport:
    inv = corpus.inventory
    queries = corpus.test if split == "test" else corpus.train
    out: dict[str, dict[str, float]] = {}
    for name, model in methods.items():
        _check_inventory(model, inv)
        div_total, ov_total = 0.0, 0.0
        for aq in queries:
            tau = model.recommend(inv, aq.text, n)
            div_total += diversity(tau, inv, tokenizer)
            ov_total += overlap(tau, aq.text, inv, tokenizer)
        out[name] = {
            "diversity": div_total / len(queries),
            "overlap": ov_total / len(queries),
        }
    return ComplementarityReport(tokenizer=tokenizer, methods=out)


# ---------------------------------------------------------------------------
# Simulated online experiment
# ---------------------------------------------------------------------------

ORACLE = "oracle"
NOISY_ORACLE = "noisy-oracle"
TOPK_METHOD = "topk_intents"


@dataclass(frozen=True)
class ClickModel:
    """Seeded stand-in for user click behaviour.

    ``oracle`` clicks a uniformly chosen label among those mapping to the
    session's latent intent (none-of-the-above when no label does);
    ``noisy-oracle`` additionally ignores a would-be click with probability
    1 - click_prob.
    """

    name: str = ORACLE
    click_prob: float = 0.9

    def __post_init__(self) -> None:
        if self.name not in (ORACLE, NOISY_ORACLE):
            raise ValueError(f"unknown click model {self.name!r}")

    def choose(
        self,
        inv: Inventory,
        shown: Sequence[LabelId],
        latent: IntentId,
        rng: np.random.Generator,
    ) -> LabelId | None:
        hits = [x for x in shown if latent in inv.labels[x].intent_ids]
        if not hits:
            return None
        pick = hits[int(rng.integers(len(hits)))]
        if self.name == NOISY_ORACLE and rng.random() >= self.click_prob:
            return None
        return pick


@dataclass
class MethodStats:
    t: int = 0  # label lists shown
    c: int = 0  # clicks
    n: int = 0  # sessions resolved or transferred
    m: int = 0  # sessions transferred

    @property
    def ctr(self) -> float | None:
        return self.c / self.t if self.t else None

    @property
    def tha(self) -> float:
        return self.m / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        return {"t": self.t, "c": self.c, "ctr": self.ctr, "n": self.n, "m": self.m, "tha": self.tha}


@dataclass
class SimReport:
    click_model: str
    seed: int
    sessions: int
    methods: dict[str, MethodStats]

    def to_dict(self) -> dict:
        return {
            "click_model": self.click_model,
            "seed": self.seed,
            "sessions": self.sessions,
            "methods": {k: v.to_dict() for k, v in self.methods.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self) -> list[list]:
        rows = [["method", "t", "c", "ctr", "n", "m", "tha"]]
        for name in sorted(self.methods):
            s = self.methods[name]
            rows.append([name, s.t, s.c, s.ctr, s.n, s.m, s.tha])
        return rows


def iter_session_plan(
    queries: Sequence[AnnotatedQuery], sessions: int, seed: int
) -> Iterator[tuple[np.random.Generator, AnnotatedQuery, IntentId]]:
    """Deterministic per-session (rng, query, latent intent) plan.

    Shared by the simulator and the live-service parity harness so both
    consume identical random streams.
    """
    for i in range(sessions):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        aq = queries[int(rng.integers(len(queries)))]
        pool = sorted(aq.potential_intents)
        latent = pool[int(rng.integers(len(pool)))]
        yield rng, aq, latent


def simulate_online(
    methods: dict[str, Recommender],
    corpus: Corpus,
    click_model: ClickModel,
    sessions: int,
    seed: int,
    index: RetrievalIndex | None = None,
    labels_shown: int = 6,
    top_k: int = 3,
    split: str = "test",
    include_topk_baseline: bool = True,
) -> SimReport:
    """Replay seeded clarification sessions per method.

    Each session draws a query and a latent intent from its potential set;
    shown labels are clicked per the click model; the clicked phrase is
    appended to the query for retrieval, and the session counts as
    transferred when the latent intent misses the retrieval top-k.  The
    retrieval-only ablation row is always included.
    """
    inv = corpus.inventory
    queries = corpus.test if split == "test" else corpus.train
    if not queries:
        raise ValueError(f"corpus has no {split} queries")
    if index is None:
        index = RetrievalIndex.from_inventory(inv)

    runs: dict[str, Recommender | None] = dict(methods)
    if include_topk_baseline:
        runs[TOPK_METHOD] = None
    stats: dict[str, MethodStats] = {}
    for name, model in runs.items():
        if model is not None:
            _check_inventory(model, inv)
        st = MethodStats()
        cache: dict[str, Trajectory] = {}
        for rng, aq, latent in iter_session_plan(queries, sessions, seed):
            if model is None:
                final_query = aq.text
            else:
                tau = cache.get(aq.text)
                if tau is None:
                    tau = model.recommend(inv, aq.text, labels_shown)
                    cache[aq.text] = tau
                st.t += 1
                choice = click_model.choose(inv, tau, latent, rng)
                if choice is None:
                    final_query = aq.text
                else:
                    st.c += 1
                    final_query = f"{aq.text} {inv.labels[choice].phrase}"
            hits = retrieve(index, final_query, top_k).hits
            st.n += 1
            if latent not in [h.intent_id for h in hits]:
                st.m += 1
        stats[name] = st
    return SimReport(click_model=click_model.name, seed=seed, sessions=sessions, methods=stats)
