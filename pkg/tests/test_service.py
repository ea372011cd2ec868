from __future__ import annotations

import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from clarify.evaluation import ClickModel, iter_session_plan, simulate_online
from clarify.inventory import AnnotatedQuery, Corpus
from clarify.service import (
    BadSelectionError,
    ClarificationEngine,
    IllegalTransitionError,
    RetrievalIndex,
    UnknownSessionError,
    create_app,
    replay_event_log,
    retrieve,
)


class FixedRecommender:
    inventory_hash = ""

    def __init__(self, ranking):
        self.ranking = tuple(ranking)

    def recommend(self, inv, query_text, n):
        return self.ranking[:n]


def bm25_oracle(inv, query: str, doc_id: int, k1=1.2, b=0.75) -> float:
    """Independent BM25 transliteration used to pin the scoring."""
    docs = [intent.text.lower().split() for intent in inv.intents]
    # fixture texts are already alphanumeric words, so splitting suffices
    n_docs = len(docs)
    avgdl = sum(len(d) for d in docs) / n_docs
    df = {}
    for d in docs:
        for t in set(d):
            df[t] = df.get(t, 0) + 1
    score = 0.0
    doc = docs[doc_id]
    for t in query.lower().split():
        f = doc.count(t)
        if not f or t not in df:
            continue
        idf = math.log(1 + (n_docs - df[t] + 0.5) / (df[t] + 0.5))
        score += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len(doc) / avgdl))
    return score


class TestRetrieve:
    def test_matches_hand_scoring_oracle(self, inv_f1):
        index = RetrievalIndex.from_inventory(inv_f1)
        query = "how to apply credit card"
        result = retrieve(index, query, 4)
        for hit in result.hits:
            assert hit.score == pytest.approx(bm25_oracle(inv_f1, query, hit.intent_id), abs=1e-12)
        assert result.hits[0].intent_id == 0  # "apply credit card" wins

    def test_exact_intent_text_ranks_first(self, inv_f1):
        index = RetrievalIndex.from_inventory(inv_f1)
        for intent in inv_f1.intents:
            result = retrieve(index, intent.text, 3)
            assert result.hits[0].intent_id == intent.id

    def test_k_zero(self, inv_f1):
        index = RetrievalIndex.from_inventory(inv_f1)
        assert retrieve(index, "apply", 0).hits == []

    def test_scores_non_increasing(self, inv_f1):
        index = RetrievalIndex.from_inventory(inv_f1)
        hits = retrieve(index, "apply credit card loan", 4).hits
        scores = [h.score for h in hits]
        assert scores == sorted(scores, reverse=True)

    def test_degenerate_query_flagged(self, inv_f1):
        index = RetrievalIndex.from_inventory(inv_f1)
        result = retrieve(index, "zzz qqq", 3)
        assert result.degenerate
        assert [h.intent_id for h in result.hits] == [0, 1, 2]  # lowest ids, zero scores

    def test_reranker_hook_applies(self, inv_f1):
        index = RetrievalIndex.from_inventory(inv_f1)
        flipped = retrieve(index, "apply", 3, reranker=lambda q, hits: hits[::-1])
        plain = retrieve(index, "apply", 3)
        assert flipped.hits == plain.hits[::-1]


@pytest.fixture()
def engine(inv_f1, tmp_path):
    return ClarificationEngine(
        inv_f1,
        FixedRecommender((0, 1, 2, 3, 4)),
        labels_shown=6,
        top_k=3,
        checkpoint_id="fixed",
        log_dir=tmp_path / "logs",
    )


class TestEngine:
    def test_full_resolved_flow(self, engine, inv_f1):
        session_id, labels, none_option = engine.start_session("how to apply")
        assert none_option
        assert len(labels) == 5  # clipped to the five labels that exist
        intents = engine.select_label(session_id, labels[1].id)
        assert len(intents) == 3
        assert intents[0].id == 0  # "credit card" click pins the first intent
        session = engine.resolve(session_id, intent_id=intents[0].id)
        assert session.state == "resolved"
        stats = engine.metrics()
        assert (stats["t"], stats["c"], stats["n"], stats["m"]) == (1, 1, 1, 0)

    def test_none_option_equals_plain_retrieval(self, engine, inv_f1):
        index = RetrievalIndex.from_inventory(inv_f1)
        session_id, _, _ = engine.start_session("how to apply")
        intents = engine.select_label(session_id, None)
        plain = [h.intent_id for h in retrieve(index, "how to apply", 3).hits]
        assert [i.id for i in intents] == plain
        stats = engine.metrics()
        assert stats["c"] == 0  # none-of-the-above is not a click

    def test_transfer_counts(self, engine):
        session_id, labels, _ = engine.start_session("apply")
        engine.select_label(session_id, labels[0].id)
        session = engine.resolve(session_id, transfer=True)
        assert session.state == "transferred"
        stats = engine.metrics()
        assert stats["m"] == 1 and stats["n"] == 1
        assert stats["tha"] == 1.0

    def test_same_query_same_labels(self, engine):
        _, labels_a, _ = engine.start_session("how to apply")
        _, labels_b, _ = engine.start_session("how to apply")
        assert [l.id for l in labels_a] == [l.id for l in labels_b]

    def test_empty_query_rejected(self, engine):
        with pytest.raises(BadSelectionError):
            engine.start_session("   ")

    def test_unknown_session(self, engine):
        with pytest.raises(UnknownSessionError):
            engine.select_label("nope", None)

    def test_label_not_shown_rejected(self, engine):
        session_id, _, _ = engine.start_session("apply")
        with pytest.raises(BadSelectionError):
            engine.select_label(session_id, 999)

    def test_double_selection_rejected(self, engine):
        session_id, labels, _ = engine.start_session("apply")
        engine.select_label(session_id, labels[0].id)
        with pytest.raises(IllegalTransitionError):
            engine.select_label(session_id, labels[0].id)

    def test_double_resolution_rejected(self, engine):
        session_id, labels, _ = engine.start_session("apply")
        engine.select_label(session_id, labels[0].id)
        engine.resolve(session_id, transfer=True)
        with pytest.raises(IllegalTransitionError):
            engine.resolve(session_id, transfer=True)

    def test_resolve_before_intents_rejected(self, engine):
        session_id, _, _ = engine.start_session("apply")
        with pytest.raises(IllegalTransitionError):
            engine.resolve(session_id, transfer=True)

    def test_intent_not_shown_rejected(self, engine):
        session_id, labels, _ = engine.start_session("apply")
        engine.select_label(session_id, labels[0].id)
        with pytest.raises(BadSelectionError):
            engine.resolve(session_id, intent_id=999)

    def test_transcript_follows_state_machine(self, engine):
        session_id, labels, _ = engine.start_session("how to apply")
        engine.select_label(session_id, labels[0].id)
        engine.resolve(session_id, transfer=True)
        kinds = [e["kind"] for e in engine.transcript(session_id)["events"]]
        assert kinds == ["user_message", "labels_shown", "label_selected", "intents_shown", "transferred"]

    def test_event_log_replay_matches_counters(self, engine, tmp_path):
        for query in ("how to apply", "credit card", "loan"):
            session_id, labels, _ = engine.start_session(query)
            intents = engine.select_label(session_id, labels[0].id)
            if query == "loan":
                engine.resolve(session_id, transfer=True)
            else:
                engine.resolve(session_id, intent_id=intents[0].id)
        replayed = replay_event_log(tmp_path / "logs")
        stats = engine.metrics()
        assert replayed == {k: stats[k] for k in ("t", "c", "n", "m")}


class TestHttpApi:
    @pytest.fixture()
    def client(self, engine):
        return TestClient(create_app(engine))

    def test_session_flow(self, client):
        r = client.post("/v1/session", json={"query": "how to apply"})
        assert r.status_code == 200
        body = r.json()
        assert body["none_option"] is True
        assert len(body["labels"]) == 5
        sid = body["session_id"]

        r = client.post(f"/v1/session/{sid}/label", json={"label_id": body["labels"][0]["id"]})
        assert r.status_code == 200
        intents = r.json()["intents"]
        assert len(intents) == 3
        assert {"id", "text", "answer"} <= set(intents[0])

        r = client.post(f"/v1/session/{sid}/resolve", json={"intent_id": intents[0]["id"]})
        assert r.status_code == 200
        assert r.json()["status"] == "resolved"

        metrics = client.get("/v1/metrics").json()
        assert metrics["t"] == 1 and metrics["c"] == 1 and metrics["n"] == 1

        transcript = client.get(f"/v1/session/{sid}").json()
        assert transcript["state"] == "resolved"

    def test_error_codes(self, client):
        assert client.post("/v1/session", json={"query": "  "}).status_code == 400
        assert client.post("/v1/session/missing/label", json={"label_id": None}).status_code == 404
        r = client.post("/v1/session", json={"query": "apply"})
        sid = r.json()["session_id"]
        assert client.post(f"/v1/session/{sid}/label", json={"label_id": 999}).status_code == 400
        client.post(f"/v1/session/{sid}/label", json={"label_id": None})
        assert client.post(f"/v1/session/{sid}/label", json={"label_id": None}).status_code == 409


def scripted_http_sessions(client, corpus, click_model, sessions: int, seed: int) -> dict:
    """Drive the HTTP API with the simulator's session plan and click logic."""
    inv = corpus.inventory
    for rng, aq, latent in iter_session_plan(corpus.test, sessions, seed):
        body = client.post("/v1/session", json={"query": aq.text}).json()
        shown = [lab["id"] for lab in body["labels"]]
        choice = click_model.choose(inv, shown, latent, rng)
        r = client.post(f"/v1/session/{body['session_id']}/label", json={"label_id": choice})
        intents = [i["id"] for i in r.json()["intents"]]
        transfer = latent not in intents
        client.post(
            f"/v1/session/{body['session_id']}/resolve",
            json={"transfer": True} if transfer else {"intent_id": latent},
        )
    return client.get("/v1/metrics").json()


class TestServiceSimulatorParity:
    def test_counters_match_simulate_online(self, inv_f1):
        queries = [
            AnnotatedQuery("how to apply", frozenset({0, 1, 2}), "test"),
            AnnotatedQuery("credit card", frozenset({0, 3}), "test"),
            AnnotatedQuery("cancel please", frozenset({3}), "test"),
        ]
        corpus = Corpus(inventory=inv_f1, queries=queries, seed=1)
        recommender = FixedRecommender((0, 1, 2, 3, 4))
        click_model = ClickModel("oracle")
        sessions, seed = 50, 17

        sim = simulate_online(
            {"fixed": recommender}, corpus, click_model, sessions, seed,
            include_topk_baseline=False,
        )
        engine = ClarificationEngine(inv_f1, recommender, labels_shown=6, top_k=3)
        client = TestClient(create_app(engine))
        live = scripted_http_sessions(client, corpus, click_model, sessions, seed)

        stats = sim.methods["fixed"]
        assert (live["t"], live["c"], live["n"], live["m"]) == (stats.t, stats.c, stats.n, stats.m)
        assert live["ctr"] == pytest.approx(stats.ctr)
        assert live["tha"] == pytest.approx(stats.tha)
