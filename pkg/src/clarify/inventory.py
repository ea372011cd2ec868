"""Intent/label universe, annotated corpora, and the synthetic benchmark generator.

The closed domain is described by an :class:`Inventory`: a list of intents
(answerable questions), a list of short label phrases, and a many-to-many
mapping between them.  An :class:`AnnotatedQuery` is an ambiguous user query
together with the set of intents that could answer it.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

IntentId = int
LabelId = int

TRAIN = "train"
TEST = "test"


class InventoryError(Exception):
    """Base class for inventory file problems."""


class InventoryFormatError(InventoryError):
    """File does not parse against the documented schema."""


class InventoryValidationError(InventoryError):
    """Parsed data violates an inventory invariant."""


@dataclass(frozen=True)
class Intent:
    id: IntentId
    text: str
    answer: str


@dataclass(frozen=True)
class Label:
    id: LabelId
    phrase: str
    intent_ids: frozenset[IntentId]


@dataclass
class Inventory:
    """The closed-domain universe of intents and labels.

    ``labels[i].intent_ids`` is the label-to-intent mapping; the inverse map
    is derived and kept consistent by construction.
    """

    intents: list[Intent]
    labels: list[Label]
    intent_to_labels: dict[IntentId, frozenset[LabelId]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._validate()
        inverse: dict[IntentId, set[LabelId]] = {i.id: set() for i in self.intents}
        for lab in self.labels:
            for sid in lab.intent_ids:
                inverse[sid].add(lab.id)
        self.intent_to_labels = {k: frozenset(v) for k, v in inverse.items()}

    def _validate(self) -> None:
        for kind, items, key in (
            ("intent", self.intents, lambda x: x.text),
            ("label", self.labels, lambda x: x.phrase),
        ):
            seen_text: set[str] = set()
            for pos, item in enumerate(items):
                if item.id != pos:
                    raise InventoryValidationError(
                        f"{kind} ids must be contiguous from 0, got id={item.id} at position {pos}"
                    )
                text = key(item)
                if not text:
                    raise InventoryValidationError(f"{kind} {item.id} has empty display text")
                if text in seen_text:
                    raise InventoryValidationError(f"duplicate {kind} text {text!r}")
                seen_text.add(text)
        valid_ids = {i.id for i in self.intents}
        for lab in self.labels:
            if not lab.intent_ids:
                raise InventoryValidationError(f"label {lab.id} ({lab.phrase!r}) maps to no intents")
            dangling = set(lab.intent_ids) - valid_ids
            if dangling:
                raise InventoryValidationError(
                    f"label {lab.id} ({lab.phrase!r}) references unknown intents {sorted(dangling)}"
                )

    def label_intents(self, label_id: LabelId) -> frozenset[IntentId]:
        """Intent set mapped from one label."""
        return self.labels[label_id].intent_ids

    def to_dict(self) -> dict:
        return {
            "intents": [{"id": i.id, "text": i.text, "answer": i.answer} for i in self.intents],
            "labels": [
                {"id": x.id, "phrase": x.phrase, "intents": sorted(x.intent_ids)}
                for x in self.labels
            ],
        }

    def content_hash(self) -> str:
        """Stable hash used to pair checkpoints with the inventory they were trained on."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AnnotatedQuery:
    """An ambiguous query with its annotated potential-intent set."""

    text: str
    potential_intents: frozenset[IntentId]
    split: str = TRAIN

    def __post_init__(self) -> None:
        if not self.potential_intents:
            raise ValueError(f"query {self.text!r} has an empty potential-intent set")
        if self.split not in (TRAIN, TEST):
            raise ValueError(f"bad split tag {self.split!r}")


@dataclass
class Corpus:
    inventory: Inventory
    queries: list[AnnotatedQuery]
    seed: int = 0

    @property
    def train(self) -> list[AnnotatedQuery]:
        return [q for q in self.queries if q.split == TRAIN]

    @property
    def test(self) -> list[AnnotatedQuery]:
        return [q for q in self.queries if q.split == TEST]


def load_inventory(path: str | Path) -> Inventory:
    """Load and validate an inventory JSON file.

    Raises :class:`InventoryFormatError` on malformed files and
    :class:`InventoryValidationError` when an invariant fails; messages name
    the offending record.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InventoryFormatError(f"{path}: not valid JSON: {exc}") from exc
    try:
        intents = [Intent(int(r["id"]), str(r["text"]), str(r["answer"])) for r in raw["intents"]]
        labels = [
            Label(int(r["id"]), str(r["phrase"]), frozenset(int(s) for s in r["intents"]))
            for r in raw["labels"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise InventoryFormatError(f"{path}: missing or malformed field: {exc}") from exc
    return Inventory(intents=intents, labels=labels)


def save_inventory(inv: Inventory, path: str | Path) -> None:
    Path(path).write_text(json.dumps(inv.to_dict(), indent=2, sort_keys=True), encoding="utf-8")


def save_corpus(corpus: Corpus, out_dir: str | Path) -> None:
    """Write inventory.json, corpus.jsonl (one query object per line) and meta.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_inventory(corpus.inventory, out / "inventory.json")
    with (out / "corpus.jsonl").open("w", encoding="utf-8") as fh:
        for q in corpus.queries:
            fh.write(
                json.dumps(
                    {"text": q.text, "intent_ids": sorted(q.potential_intents), "split": q.split},
                    sort_keys=True,
                )
                + "\n"
            )
    meta = {"seed": corpus.seed, "inventory_hash": corpus.inventory.content_hash()}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")


def load_corpus(corpus_dir: str | Path) -> Corpus:
    """Load a corpus directory written by :func:`save_corpus` (or hand-built)."""
    d = Path(corpus_dir)
    inv = load_inventory(d / "inventory.json")
    queries: list[AnnotatedQuery] = []
    known = {i.id for i in inv.intents}
    with (d / "corpus.jsonl").open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                ids = frozenset(int(s) for s in rec["intent_ids"])
                q = AnnotatedQuery(str(rec["text"]), ids, str(rec.get("split", TRAIN)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InventoryFormatError(f"corpus.jsonl line {lineno}: {exc}") from exc
            stray = ids - known
            if stray:
                raise InventoryValidationError(
                    f"corpus.jsonl line {lineno}: unknown intent ids {sorted(stray)}"
                )
            queries.append(q)
    seed = 0
    meta_path = d / "meta.json"
    if meta_path.exists():
        seed = int(json.loads(meta_path.read_text(encoding="utf-8")).get("seed", 0))
    return Corpus(inventory=inv, queries=queries, seed=seed)


def candidate_labels(inv: Inventory, aq: AnnotatedQuery) -> frozenset[LabelId]:
    """Labels whose intent set intersects the query's potential intents.

    This is the pruned action space used everywhere downstream: only labels
    related to at least one potential intent are worth recommending.
    """
    qset = aq.potential_intents
    return frozenset(x.id for x in inv.labels if x.intent_ids & qset)


def intent_probabilities(aq: AnnotatedQuery) -> dict[IntentId, float]:
    """Uniform answer probability over the potential intents (zero elsewhere)."""
    mass = 1.0 / len(aq.potential_intents)
    return {sid: mass for sid in sorted(aq.potential_intents)}


# ---------------------------------------------------------------------------
# Tokenization
# ---------------------------------------------------------------------------

WHITESPACE = "whitespace"
CHAR_BIGRAM = "char-bigram"

_WORD_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str, scheme: str = WHITESPACE) -> list[str]:
    """Deterministic lowercase tokenization.

    ``whitespace`` keeps alphanumeric words; ``char-bigram`` further splits
    each word into overlapping character bigrams (single-character words are
    kept whole).
    """
    words = _WORD_RE.findall(text.lower())
    if scheme == WHITESPACE:
        return words
    if scheme == CHAR_BIGRAM:
        out: list[str] = []
        for w in words:
            if len(w) == 1:
                out.append(w)
            else:
                out.extend(w[i : i + 2] for i in range(len(w) - 1))
        return out
    raise ValueError(f"unknown tokenizer scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Synthetic benchmark generator
# ---------------------------------------------------------------------------

# Attribute pools.  Intents are (action, product) pairs; labels are attribute
# values, so one action label maps to every intent using that action, which
# yields the many-to-many structure the recommender exploits.

_ACTIONS = [
    "apply", "cancel", "renew", "activate", "close", "open", "upgrade",
    "downgrade", "transfer", "freeze", "unfreeze", "replace", "report",
    "dispute", "repay", "refinance", "redeem", "enroll", "unsubscribe",
    "verify", "update", "link", "unlink", "track", "extend", "suspend",
    "restore", "register", "claim", "withdraw", "deposit", "exchange",
    "borrow", "insure", "invest", "donate", "recover", "reset", "review",
    "order", "return", "reissue", "increase", "decrease", "split", "merge",
    "export", "validate", "appeal", "waive", "renounce", "settle",
]

_PRODUCT_ADJ = [
    "gold", "silver", "platinum", "basic", "family", "student", "business",
    "travel", "digital", "prepaid", "joint", "premier",
]

_PRODUCT_NOUN = [
    "card", "loan", "account", "insurance", "mortgage", "wallet", "deposit",
    "pension", "bond", "overdraft", "lease", "subscription", "cheque",
    "annuity", "voucher", "warranty",
]

# Suffixes for synonym labels; sharing the head token with the base phrase
# reproduces the token-level repetition the diversity metric is sensitive to.
_SYNONYM_SUFFIX = [
    "online", "service", "request", "form", "plus", "now", "pro", "fee",
    "limit", "portal", "center", "desk",
]

_ACTION_TEMPLATES = [
    "how to {v}", "{v}", "i want to {v}", "need to {v}", "can i {v}",
    "help me {v}", "{v} online",
]

_PRODUCT_TEMPLATES = [
    "{p}", "my {p}", "{p} help", "about {p}", "{p} question",
    "issue with my {p}", "{p} support",
]

# Entity-ambiguous queries name only a product category (the noun), so the
# potential intents span every concrete product under it and no single label
# covers them.
_NOUN_TEMPLATES = [
    "my {w}", "{w}", "{w} help", "need a {w}", "{w} not working",
    "question about my {w}",
]


class GeneratorConfigError(ValueError):
    """Benchmark generator configuration cannot be satisfied."""


@dataclass(frozen=True)
class GeneratorConfig:
    n_intents: int = 200
    n_labels: int = 80
    n_queries: int = 500
    # None: size the attribute pools so each value is used ~6 times, which
    # keeps the potential-intent sets small enough to partition with 6 labels.
    n_actions: int | None = None
    n_products: int | None = None
    # An attribute value appears in at most this many intents, so the
    # potential-intent sets stay coverable by a 6-label recommendation.
    max_degree: int = 6
    # Fraction of queries that are entity-ambiguous: only the product-noun
    # category is kept, so the potential set spans several concrete products.
    noun_query_fraction: float = 0.2
    train_fraction: float = 0.9
    # Queries with fewer potential intents than this are resampled; keeps the
    # corpus genuinely ambiguous.
    min_ambiguity: int = 2

    def pool_sizes(self) -> tuple[int, int]:
        auto = max(
            2,
            math.ceil(self.n_intents / self.max_degree),
            math.ceil(math.sqrt(2 * self.n_intents)),
        )
        return (self.n_actions or auto, self.n_products or auto)


def generate_benchmark(cfg: GeneratorConfig, seed: int) -> Corpus:
    """Deterministically build a synthetic annotated corpus.

    Intents are sampled (action, product) attribute pairs.  Every attribute
    value in use becomes a label; the remaining label budget is spent on
    synonym labels that duplicate a value's intent set under a variant
    phrase.  Ambiguous queries drop one attribute of an intent, so the
    potential-intent set is exactly the intents sharing the kept attribute.
    """
    rng = random.Random(seed)
    n_actions, n_products = cfg.pool_sizes()
    if n_actions > len(_ACTIONS):
        raise GeneratorConfigError(f"at most {len(_ACTIONS)} actions available")
    actions = rng.sample(_ACTIONS, n_actions)
    combos = [f"{a} {n}" for a in _PRODUCT_ADJ for n in _PRODUCT_NOUN]
    if n_products > len(combos):
        raise GeneratorConfigError(f"at most {len(combos)} products available")
    products = rng.sample(combos, n_products)

    pool = [(a, p) for a in actions for p in products]
    if cfg.n_intents > len(pool):
        raise GeneratorConfigError(
            f"n_intents={cfg.n_intents} exceeds the {len(pool)} available attribute pairs"
        )
    rng.shuffle(pool)
    # two passes: respect the degree cap first, then relax it if the pool
    # cannot satisfy the requested intent count under the cap
    pairs: list[tuple[str, str]] = []
    degree: dict[str, int] = {}
    leftovers: list[tuple[str, str]] = []
    for a, p in pool:
        if len(pairs) == cfg.n_intents:
            break
        if degree.get(a, 0) < cfg.max_degree and degree.get(p, 0) < cfg.max_degree:
            pairs.append((a, p))
            degree[a] = degree.get(a, 0) + 1
            degree[p] = degree.get(p, 0) + 1
        else:
            leftovers.append((a, p))
    pairs.extend(leftovers[: cfg.n_intents - len(pairs)])

    intents = [
        Intent(i, f"{a} {p}", f"To {a} your {p}, open the {p} page and follow the {a} steps.")
        for i, (a, p) in enumerate(pairs)
    ]

    by_action: dict[str, set[int]] = {}
    by_product: dict[str, set[int]] = {}
    by_noun: dict[str, set[int]] = {}
    for i, (a, p) in enumerate(pairs):
        by_action.setdefault(a, set()).add(i)
        by_product.setdefault(p, set()).add(i)
        by_noun.setdefault(p.split()[-1], set()).add(i)

    # One label per attribute value in use, in a deterministic order.
    values: list[tuple[str, frozenset[int]]] = []
    for a in actions:
        if a in by_action:
            values.append((a, frozenset(by_action[a])))
    for p in products:
        if p in by_product:
            values.append((p, frozenset(by_product[p])))
    if cfg.n_labels < len(values):
        raise GeneratorConfigError(
            f"n_labels={cfg.n_labels} is below the {len(values)} distinct attribute values"
        )

    labels = [Label(i, phrase, ids) for i, (phrase, ids) in enumerate(values)]
    taken = {phrase for phrase, _ in values}
    synonym_base = list(range(len(values)))
    rng.shuffle(synonym_base)
    capacity = len(values) * len(_SYNONYM_SUFFIX)
    if cfg.n_labels - len(values) > capacity:
        raise GeneratorConfigError(
            f"label budget {cfg.n_labels} exceeds the {len(values) + capacity} phrases "
            "available from the attribute values and synonym suffixes"
        )
    k = 0
    while len(labels) < cfg.n_labels:
        base_phrase, base_ids = values[synonym_base[k % len(synonym_base)]]
        k += 1
        for suffix in rng.sample(_SYNONYM_SUFFIX, len(_SYNONYM_SUFFIX)):
            phrase = f"{base_phrase} {suffix}"
            if phrase not in taken:
                taken.add(phrase)
                labels.append(Label(len(labels), phrase, base_ids))
                break
        else:
            continue  # all suffixes taken for this base; try the next one

    inventory = Inventory(intents=intents, labels=labels)

    queries: list[AnnotatedQuery] = []
    for _ in range(cfg.n_queries):
        for _attempt in range(64):
            a, p = pairs[rng.randrange(len(pairs))]
            roll = rng.random()
            if roll < cfg.noun_query_fraction:
                noun = p.split()[-1]
                qset, text = by_noun[noun], rng.choice(_NOUN_TEMPLATES).format(w=noun)
            elif roll < cfg.noun_query_fraction + (1.0 - cfg.noun_query_fraction) / 2:
                qset, text = by_action[a], rng.choice(_ACTION_TEMPLATES).format(v=a)
            else:
                qset, text = by_product[p], rng.choice(_PRODUCT_TEMPLATES).format(p=p)
            if len(qset) >= cfg.min_ambiguity:
                break
        queries.append(AnnotatedQuery(text, frozenset(qset), TRAIN))

    order = list(range(len(queries)))
    rng.shuffle(order)
    n_train = round(cfg.train_fraction * len(queries))
    test_idx = set(order[n_train:])
    queries = [
        AnnotatedQuery(q.text, q.potential_intents, TEST if i in test_idx else TRAIN)
        for i, q in enumerate(queries)
    ]
    return Corpus(inventory=inventory, queries=queries, seed=seed)
