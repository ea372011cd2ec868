"""Two-stage clarification pipeline: label suggestion, then lexical intent retrieval.

A session walks a fixed state machine:

    open -> labels_shown -> intents_shown -> {resolved, transferred}

The engine keeps the service-level counters (label lists shown ``t``, clicks
``c``, closed sessions ``n``, transfers ``m``) and optionally appends every
event to a daily JSON-lines log from which the counters can be replayed.

Retrieval is BM25 over the intent texts with k1=1.2, b=0.75 and
idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)); per-term contribution is
idf * f * (k1 + 1) / (f + k1 * (1 - b + b * dl / avgdl)).  A re-ranker hook
marks where a semantic model could reorder the BM25 shortlist.
"""

from __future__ import annotations

import json
import math
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

from pydantic import BaseModel

from .inventory import Intent, IntentId, Inventory, Label, LabelId, tokenize


class ServiceError(Exception):
    pass


class UnknownSessionError(ServiceError):
    pass


class IllegalTransitionError(ServiceError):
    pass


class BadSelectionError(ServiceError):
    pass


# ---------------------------------------------------------------------------
# BM25 retrieval
# ---------------------------------------------------------------------------

class ScoredIntent(NamedTuple):
    intent_id: IntentId
    score: float


class RetrievalResult(NamedTuple):
    hits: list[ScoredIntent]
    degenerate: bool  # no query token matched the index


@dataclass
class RetrievalIndex:
    doc_term_freqs: list[dict[str, int]]
    doc_lengths: list[int]
    avg_doc_length: float
    idf: dict[str, float]
    k1: float = 1.2
    b: float = 0.75

    @classmethod
    def from_inventory(cls, inv: Inventory, k1: float = 1.2, b: float = 0.75) -> "RetrievalIndex":
        docs = [tokenize(intent.text) for intent in inv.intents]
        term_freqs = []
        df: dict[str, int] = {}
        for toks in docs:
            tf: dict[str, int] = {}
            for t in toks:
                tf[t] = tf.get(t, 0) + 1
            term_freqs.append(tf)
            for t in tf:
                df[t] = df.get(t, 0) + 1
        n_docs = len(docs)
        lengths = [len(toks) for toks in docs]
        avgdl = sum(lengths) / n_docs if n_docs else 0.0
        idf = {t: math.log(1.0 + (n_docs - n + 0.5) / (n + 0.5)) for t, n in df.items()}
        return cls(term_freqs, lengths, avgdl, idf, k1=k1, b=b)

    def score(self, query_tokens: Sequence[str], doc: int) -> float:
        tf = self.doc_term_freqs[doc]
        norm = self.k1 * (1.0 - self.b + self.b * self.doc_lengths[doc] / self.avg_doc_length)
        s = 0.0
        for t in query_tokens:
            f = tf.get(t)
            if not f:
                continue
            s += self.idf[t] * f * (self.k1 + 1.0) / (f + norm)
        return s


def retrieve(
    index: RetrievalIndex,
    query_text: str,
    k: int,
    reranker: Callable[[str, list[ScoredIntent]], list[ScoredIntent]] | None = None,
) -> RetrievalResult:
    """BM25 top-k intents, descending score with ascending-id tie break.

    ``reranker`` is the extension point for a semantic reordering stage; the
    default pipeline runs without one.
    """
    tokens = tokenize(query_text)
    n_docs = len(index.doc_term_freqs)
    scored = [ScoredIntent(i, index.score(tokens, i)) for i in range(n_docs)]
    scored.sort(key=lambda h: (-h.score, h.intent_id))
    hits = scored[: max(0, min(k, n_docs))]
    if reranker is not None:
        hits = reranker(query_text, hits)
    return RetrievalResult(hits=hits, degenerate=all(h.score == 0.0 for h in hits))


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------

LABELS_SHOWN = "labels_shown"
INTENTS_SHOWN = "intents_shown"
RESOLVED = "resolved"
TRANSFERRED = "transferred"


@dataclass
class Session:
    session_id: str
    query_text: str
    state: str
    checkpoint_id: str
    rounds: int = 0
    shown_labels: list[LabelId] = field(default_factory=list)
    shown_intents: list[IntentId] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)

    def transcript(self) -> dict:
        return {
            "session_id": self.session_id,
            "state": self.state,
            "checkpoint_id": self.checkpoint_id,
            "events": list(self.events),
        }


class ClarificationEngine:
    """Session manager wiring the recommender and the retrieval index together."""

    def __init__(
        self,
        inventory: Inventory,
        recommender,
        index: RetrievalIndex | None = None,
        labels_shown: int = 6,
        top_k: int = 3,
        max_rounds: int = 3,
        checkpoint_id: str = "",
        log_dir: str | Path | None = None,
    ):
        self.inventory = inventory
        self.recommender = recommender
        self.index = index or RetrievalIndex.from_inventory(inventory)
        self.labels_shown = labels_shown
        self.top_k = top_k
        self.max_rounds = max_rounds
        self.checkpoint_id = checkpoint_id
        self.log_dir = Path(log_dir) if log_dir else None
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.t = 0
        self.c = 0
        self.n = 0
        self.m = 0

    # -- internals -----------------------------------------------------------

    def _log_event(self, session: Session, event: dict) -> None:
        event = {"session_id": session.session_id, **event}
        session.events.append(event)
        if self.log_dir is not None:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            day = datetime.now(timezone.utc).strftime("%Y%m%d")
            with (self.log_dir / f"sessions-{day}.jsonl").open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _get(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSessionError(f"unknown session {session_id!r}") from None

    # -- operations ------------------------------------------------------------

    def start_session(self, query_text: str) -> tuple[str, list[Label], bool]:
        """Open a session: recommend labels for the query plus a none-option."""
        if not query_text or not query_text.strip():
            raise BadSelectionError("query text must be non-empty")
        tau = self.recommender.recommend(self.inventory, query_text, self.labels_shown)
        session = Session(
            session_id=uuid.uuid4().hex,
            query_text=query_text,
            state=LABELS_SHOWN,
            checkpoint_id=self.checkpoint_id,
            shown_labels=list(tau),
        )
        with self._lock:
            self._sessions[session.session_id] = session
            self.t += 1
        self._log_event(session, {"kind": "user_message", "text": query_text})
        self._log_event(session, {"kind": "labels_shown", "labels": list(tau), "none_option": True})
        return session.session_id, [self.inventory.labels[x] for x in tau], True

    def select_label(self, session_id: str, choice: LabelId | None) -> list[Intent]:
        """Record the click (or none-of-the-above) and retrieve top intents."""
        session = self._get(session_id)
        if session.state != LABELS_SHOWN:
            raise IllegalTransitionError(f"session is in state {session.state!r}, expected labels")
        if session.rounds >= self.max_rounds:
            raise IllegalTransitionError("clarification round budget exhausted")
        if choice is not None:
            if choice not in session.shown_labels:
                raise BadSelectionError(f"label {choice} was not among the shown labels")
            query = f"{session.query_text} {self.inventory.labels[choice].phrase}"
        else:
            query = session.query_text  # none-of-the-above: plain retrieval
        result = retrieve(self.index, query, self.top_k)
        intents = [h.intent_id for h in result.hits]
        with self._lock:
            if choice is not None:
                self.c += 1
            session.rounds += 1
            session.state = INTENTS_SHOWN
            session.shown_intents = intents
        self._log_event(session, {"kind": "label_selected", "label": choice})
        self._log_event(session, {"kind": "intents_shown", "intents": intents})
        return [self.inventory.intents[s] for s in intents]

    def resolve(self, session_id: str, intent_id: IntentId | None = None, transfer: bool = False) -> Session:
        """Close the session as resolved (an intent answered) or transferred."""
        session = self._get(session_id)
        if session.state != INTENTS_SHOWN:
            raise IllegalTransitionError(f"session is in state {session.state!r}, expected intents")
        if not transfer:
            if intent_id is None:
                raise BadSelectionError("either an intent id or transfer is required")
            if intent_id not in session.shown_intents:
                raise BadSelectionError(f"intent {intent_id} was not among the shown intents")
        with self._lock:
            session.state = TRANSFERRED if transfer else RESOLVED
            self.n += 1
            if transfer:
                self.m += 1
        kind = "transferred" if transfer else "intent_selected"
        self._log_event(session, {"kind": kind, "intent": None if transfer else intent_id})
        return session

    def metrics(self) -> dict:
        with self._lock:
            return {
                "t": self.t,
                "c": self.c,
                "ctr": self.c / self.t if self.t else None,
                "n": self.n,
                "m": self.m,
                "tha": self.m / self.n if self.n else 0.0,
                # every incoming query is treated as ambiguous; there is no
                # upstream ambiguity classifier in this implementation
                "clarifies_all_queries": True,
            }

    def transcript(self, session_id: str) -> dict:
        return self._get(session_id).transcript()


def replay_event_log(log_dir: str | Path) -> dict:
    """Reconstruct the metric counters from the append-only event log."""
    t = c = n = m = 0
    for path in sorted(Path(log_dir).glob("sessions-*.jsonl")):
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                kind = event.get("kind")
                if kind == "labels_shown":
                    t += 1
                elif kind == "label_selected" and event.get("label") is not None:
                    c += 1
                elif kind == "intent_selected":
                    n += 1
                elif kind == "transferred":
                    n += 1
                    m += 1
    return {"t": t, "c": c, "n": n, "m": m}


# ---------------------------------------------------------------------------
# HTTP API
# ---------------------------------------------------------------------------

class SessionBody(BaseModel):
    query: str


class LabelBody(BaseModel):
    label_id: int | None = None


class ResolveBody(BaseModel):
    intent_id: int | None = None
    transfer: bool = False


def create_app(engine: ClarificationEngine):
    """FastAPI wrapper exposing the engine as the JSON API the chat UI consumes."""
    from fastapi import FastAPI, HTTPException

    app = FastAPI(title="clarify", version="0.1.0")

    def _guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except IllegalTransitionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except BadSelectionError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/v1/session")
    def start_session(body: SessionBody):
        session_id, labels, none_option = _guard(engine.start_session, body.query)
        return {
            "session_id": session_id,
            "labels": [{"id": lab.id, "phrase": lab.phrase} for lab in labels],
            "none_option": none_option,
        }

    @app.post("/v1/session/{session_id}/label")
    def select_label(session_id: str, body: LabelBody):
        intents = _guard(engine.select_label, session_id, body.label_id)
        return {
            "intents": [{"id": i.id, "text": i.text, "answer": i.answer} for i in intents]
        }

    @app.post("/v1/session/{session_id}/resolve")
    def resolve(session_id: str, body: ResolveBody):
        session = _guard(engine.resolve, session_id, body.intent_id, body.transfer)
        return {"status": session.state}

    @app.get("/v1/metrics")
    def metrics():
        return engine.metrics()

    @app.get("/v1/session/{session_id}")
    def transcript(session_id: str):
        return _guard(engine.transcript, session_id)

    return app
