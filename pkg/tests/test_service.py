import json

import pytest
from fastapi.testclient import TestClient

from tvsg.service import ServiceConfig, create_app
from tvsg.synth import SynthConfig, generate_corpus


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(SynthConfig(show="svc", chars=3, scenes=4, seed=9))


@pytest.fixture()
def make_client(corpus, tmp_path):
    def factory(reveal=True, data_dir=None):
        cfg = ServiceConfig(
            corpus=corpus,
            data_dir=data_dir or tmp_path / "study",
            reveal_correct=reveal,
        )
        return TestClient(create_app(cfg))

    return factory


def gold_of(corpus, item):
    ref = item["scene_ref"]
    for inst in corpus:
        if (inst.show, inst.episode_id, inst.scene_index) == (
            ref["show"], ref["episode_id"], ref["scene_index"],
        ):
            return inst.gold[item["speaker_id"]]
    raise AssertionError("served item not in corpus")


def answer_for(item, annotator, guess, evidence=None, dependency="none"):
    return {
        "scene_ref": item["scene_ref"],
        "speaker_id": item["speaker_id"],
        "annotator_id": annotator,
        "guess": guess,
        "evidence": evidence or [{"coarse": "linguistic_style"}],
        "dependency": dependency,
        "reasoning": [],
    }


def run_session(client, corpus, annotator, wrong_every=None, seed=0):
    """Answer a whole session; returns (n_items, n_intentionally_wrong)."""
    sid = client.get("/api/session", params={"annotator": annotator, "seed": seed}).json()["session_id"]
    total = client.get(f"/api/session/{sid}/next").json()["total"]
    wrong = 0
    for i in range(total):
        item = client.get(f"/api/session/{sid}/next").json()["item"]
        gold = gold_of(corpus, item)
        guess = gold
        if wrong_every and i % wrong_every == 0:
            others = [c for c in item["candidates"] if c != gold]
            guess = others[0]
            wrong += 1
        resp = client.post(f"/api/session/{sid}/answer",
                           json=answer_for(item, annotator, guess))
        assert resp.status_code == 200, resp.text
    return total, wrong


class TestSessions:
    def test_create_reports_queue_size(self, make_client, corpus):
        client = make_client()
        resp = client.get("/api/session", params={"annotator": "a1"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["total"] == sum(len(inst.gold) for inst in corpus)
        assert body["session_id"]

    def test_empty_annotator_rejected(self, make_client):
        resp = make_client().get("/api/session", params={"annotator": ""})
        assert resp.status_code == 422

    def test_unknown_show_rejected(self, make_client):
        resp = make_client().get("/api/session",
                                 params={"annotator": "a1", "show": "ghost"})
        assert resp.status_code == 422
        assert "problems" in resp.json()

    def test_unknown_session_is_404(self, make_client):
        assert make_client().get("/api/session/beef/next").status_code == 404

    def test_queue_order_is_seeded(self, make_client):
        client = make_client()
        refs = []
        for _ in range(2):
            sid = client.get("/api/session",
                             params={"annotator": "a1", "seed": 3}).json()["session_id"]
            item = client.get(f"/api/session/{sid}/next").json()["item"]
            refs.append((item["scene_ref"]["scene_index"], item["speaker_id"]))
        assert refs[0] == refs[1]


class TestNextItem:
    def test_payload_shape_and_hidden_fields(self, make_client):
        client = make_client()
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        body = client.get(f"/api/session/{sid}/next").json()
        assert set(body) == {"session_id", "cursor", "total", "item"}
        assert body["cursor"] == 0
        item = body["item"]
        assert set(item) == {"scene_ref", "speaker_id", "candidates", "lines"}
        assert item["speaker_id"].startswith("P")
        for line in item["lines"]:
            assert "gold" not in line
        raw = json.dumps({k: v for k, v in item.items() if k != "candidates"})
        for name in ("svc0", "svc1", "svc2"):
            assert name not in raw

    def test_next_is_idempotent_until_answered(self, make_client, corpus):
        client = make_client()
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        first = client.get(f"/api/session/{sid}/next").json()
        again = client.get(f"/api/session/{sid}/next").json()
        assert first == again
        item = first["item"]
        client.post(f"/api/session/{sid}/answer",
                    json=answer_for(item, "a1", gold_of(corpus, item)))
        moved = client.get(f"/api/session/{sid}/next").json()
        assert moved["cursor"] == 1
        assert moved["item"] != item


class TestAnswers:
    def test_correct_flag_and_advance(self, make_client, corpus):
        client = make_client()
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        item = client.get(f"/api/session/{sid}/next").json()["item"]
        gold = gold_of(corpus, item)
        resp = client.post(f"/api/session/{sid}/answer", json=answer_for(item, "a1", gold))
        assert resp.status_code == 200
        assert resp.json() == {"correct": True, "warnings": []}
        nxt = client.get(f"/api/session/{sid}/next").json()["item"]
        wrong_guess = [c for c in nxt["candidates"] if c != gold_of(corpus, nxt)][0]
        resp = client.post(f"/api/session/{sid}/answer", json=answer_for(nxt, "a1", wrong_guess))
        assert resp.json()["correct"] is False

    def test_reveal_off_returns_null(self, make_client, corpus):
        client = make_client(reveal=False)
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        item = client.get(f"/api/session/{sid}/next").json()["item"]
        resp = client.post(f"/api/session/{sid}/answer",
                           json=answer_for(item, "a1", gold_of(corpus, item)))
        assert resp.json()["correct"] is None

    def test_replaying_an_item_is_out_of_order(self, make_client, corpus):
        client = make_client()
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        item = client.get(f"/api/session/{sid}/next").json()["item"]
        payload = answer_for(item, "a1", gold_of(corpus, item))
        assert client.post(f"/api/session/{sid}/answer", json=payload).status_code == 200
        replay = client.post(f"/api/session/{sid}/answer", json=payload)
        assert replay.status_code == 409
        assert replay.json()["error"] == "OutOfOrder"

    def test_wrong_annotator_rejected(self, make_client, corpus):
        client = make_client()
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        item = client.get(f"/api/session/{sid}/next").json()["item"]
        resp = client.post(f"/api/session/{sid}/answer",
                           json=answer_for(item, "intruder", gold_of(corpus, item)))
        assert resp.status_code == 422

    def test_fact_without_subtype_rejected(self, make_client, corpus):
        client = make_client()
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        item = client.get(f"/api/session/{sid}/next").json()["item"]
        resp = client.post(
            f"/api/session/{sid}/answer",
            json=answer_for(item, "a1", gold_of(corpus, item),
                            evidence=[{"coarse": "fact"}]),
        )
        assert resp.status_code == 422
        assert any("subtype" in p for p in resp.json()["problems"])
        # the rejected answer must not advance the queue
        assert client.get(f"/api/session/{sid}/next").json()["cursor"] == 0

    def test_structural_problems_rejected(self, make_client):
        client = make_client()
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        resp = client.post(f"/api/session/{sid}/answer", json={"guess": "svc0"})
        assert resp.status_code == 422
        assert any("scene_ref" in p for p in resp.json()["problems"])

    def test_warnings_are_surfaced(self, make_client, corpus):
        client = make_client()
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        item = client.get(f"/api/session/{sid}/next").json()["item"]
        resp = client.post(
            f"/api/session/{sid}/answer",
            json=answer_for(item, "a1", gold_of(corpus, item),
                            evidence=[{"coarse": "exclusion"}], dependency="none"),
        )
        assert resp.status_code == 200
        assert len(resp.json()["warnings"]) == 1

    def test_session_exhausted(self, make_client, corpus):
        client = make_client()
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        total = client.get(f"/api/session/{sid}/next").json()["total"]
        for _ in range(total):
            item = client.get(f"/api/session/{sid}/next").json()["item"]
            client.post(f"/api/session/{sid}/answer",
                        json=answer_for(item, "a1", gold_of(corpus, item)))
        resp = client.get(f"/api/session/{sid}/next")
        assert resp.status_code == 409
        assert resp.json()["error"] == "SessionExhausted"


class TestSummary:
    def test_empty_log_is_409(self, make_client):
        assert make_client().get("/api/summary").status_code == 409

    def test_accuracy_and_agreement(self, make_client, corpus):
        client = make_client()
        total, wrong1 = run_session(client, corpus, "a1", wrong_every=3)
        _, wrong2 = run_session(client, corpus, "a2")
        body = client.get("/api/summary").json()
        assert body["n_records"] == 2 * total
        assert body["annotators"] == ["a1", "a2"]
        acc = body["accuracy"]
        assert acc["per_annotator"]["a1"] == (total - wrong1) / total
        assert acc["per_annotator"]["a2"] == 1.0
        assert acc["overall"] == (2 * total - wrong1) / (2 * total)
        assert acc["per_show"]["svc"] == acc["overall"]
        agreement = body["agreement"]
        assert len(agreement) == 1
        assert agreement[0]["a"] == "a1" and agreement[0]["b"] == "a2"
        assert agreement[0]["n_items"] == total
        assert body["reveal_mode"] == "on"


class TestPersistence:
    def test_sessions_and_log_survive_restart(self, make_client, corpus, tmp_path):
        data_dir = tmp_path / "persist"
        client = make_client(data_dir=data_dir)
        sid = client.get("/api/session", params={"annotator": "a1"}).json()["session_id"]
        for _ in range(2):
            item = client.get(f"/api/session/{sid}/next").json()["item"]
            client.post(f"/api/session/{sid}/answer",
                        json=answer_for(item, "a1", gold_of(corpus, item)))
        expected = client.get(f"/api/session/{sid}/next").json()

        reborn = make_client(data_dir=data_dir)
        body = reborn.get(f"/api/session/{sid}/next").json()
        assert body == expected
        assert body["cursor"] == 2
        summary = reborn.get("/api/summary").json()
        assert summary["n_records"] == 2
        assert summary["accuracy"]["overall"] == 1.0
