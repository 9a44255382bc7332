"""Review HTTP API: payloads, gates, optimistic concurrency."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from semdag.review import CandidateStore
from semdag.review_service import create_app

from .conftest import make_dag

DOC = {
    "metadata": {
        "paper_id": "p1",
        "title": "Causality in cirrhosis",
        "abstract": "We study ascites.",
        "source_repo": "arxiv",
        "publication_date": "2024-01-01",
        "keyword_hits": [],
    },
    "blocks": [
        {"block_id": "b1", "kind": "paragraph", "text": "Cirrhosis causes ascites.", "page": 1, "order": 0},
        {"block_id": "b2", "kind": "paragraph", "text": "Ascites raises pressure.", "page": 1, "order": 1},
    ],
    "figures": [],
}


@pytest.fixture
def client(tmp_path) -> TestClient:
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "p1.json").write_text(json.dumps(DOC), encoding="utf-8")
    (corpus / "fig.png").write_bytes(b"\x89PNG\r\n\x1a\nfake")
    store = CandidateStore(tmp_path / "candidates")
    dag = make_dag(
        ["cirrhosis", "ascites"],
        [("cirrhosis", "ascites")],
        node_evidence={"cirrhosis": ("b1",), "ascites": ("b2",)},
        edge_evidence={("cirrhosis", "ascites"): ("b1",)},
    )
    store.create("cand1", dag, meta={"figure_id": "fig1", "doc_path": "p1.json", "image_ref": "fig.png"})
    app = create_app(store, corpus)
    return TestClient(app)


def version_of(client: TestClient, cid: str = "cand1") -> int:
    return client.get(f"/api/v1/candidates/{cid}").json()["version"]


class TestFetch:
    def test_list(self, client):
        rows = client.get("/api/v1/candidates").json()
        assert [r["candidate_id"] for r in rows] == ["cand1"]
        assert rows[0]["status"] == "pending"

    def test_detail_payload_has_resolved_evidence(self, client):
        body = client.get("/api/v1/candidates/cand1").json()
        assert body["dag"]["nodes"][0]["id"] == "ascites"
        assert body["topological_order"] == ["cirrhosis", "ascites"]
        node_evidence = body["evidence"]["nodes"]["cirrhosis"]
        assert node_evidence == [{"block_id": "b1", "text": "Cirrhosis causes ascites."}]
        edge_evidence = body["evidence"]["edges"]["cirrhosis->ascites"]
        assert edge_evidence[0]["text"] == "Cirrhosis causes ascites."

    def test_unknown_candidate_404(self, client):
        assert client.get("/api/v1/candidates/ghost").status_code == 404

    def test_figure_bytes_served(self, client):
        resp = client.get("/api/v1/candidates/cand1/figure")
        assert resp.status_code == 200
        assert resp.content.startswith(b"\x89PNG")


class TestGates:
    def test_scope_then_quality_approve(self, client):
        v = version_of(client)
        resp = client.post(
            "/api/v1/candidates/cand1/scope",
            json={"decision": "in_scope", "actor": "expert-1", "version": v},
        )
        assert resp.status_code == 200
        v = resp.json()["version"]
        resp = client.post(
            "/api/v1/candidates/cand1/quality",
            json={"action": "approve", "actor": "expert-1", "version": v},
        )
        assert resp.json()["status"] == "approved"

    def test_edit_via_api_increments_count(self, client):
        v = version_of(client)
        v = client.post(
            "/api/v1/candidates/cand1/scope",
            json={"decision": "in_scope", "actor": "e", "version": v},
        ).json()["version"]
        resp = client.post(
            "/api/v1/candidates/cand1/quality",
            json={
                "action": "edit",
                "actor": "e",
                "version": v,
                "edit": {"op": "replace_description", "node_id": "ascites", "description": "fluid buildup"},
            },
        )
        assert resp.json()["edit_count"] == 1

    def test_invalid_transition_422(self, client):
        v = version_of(client)
        resp = client.post(
            "/api/v1/candidates/cand1/quality",
            json={"action": "approve", "actor": "e", "version": v},
        )
        assert resp.status_code == 422

    def test_concurrent_double_approve_second_gets_409(self, client):
        # Two-client simulation: both load version v, the slower client's
        # write must fail with a conflict rather than double-applying.
        v = version_of(client)
        first = client.post(
            "/api/v1/candidates/cand1/scope",
            json={"decision": "in_scope", "actor": "tab-1", "version": v},
        )
        assert first.status_code == 200
        second = client.post(
            "/api/v1/candidates/cand1/scope",
            json={"decision": "out_of_scope", "reason": "cyclic", "actor": "tab-2", "version": v},
        )
        assert second.status_code == 409

    def test_budget_exceeded_maps_to_422_and_terminal(self, client):
        v = version_of(client)
        v = client.post(
            "/api/v1/candidates/cand1/scope", json={"decision": "in_scope", "actor": "e", "version": v}
        ).json()["version"]
        for i in range(5):
            v = client.post(
                "/api/v1/candidates/cand1/quality",
                json={
                    "action": "edit",
                    "actor": "e",
                    "version": v,
                    "edit": {"op": "replace_description", "node_id": "ascites", "description": f"pass {i}"},
                },
            ).json()["version"]
        resp = client.post(
            "/api/v1/candidates/cand1/quality",
            json={
                "action": "edit",
                "actor": "e",
                "version": v,
                "edit": {"op": "replace_description", "node_id": "ascites", "description": "pass 6"},
            },
        )
        assert resp.status_code == 422
        assert "budget_exceeded" in resp.json()["detail"]
        state = client.get("/api/v1/candidates/cand1").json()
        assert state["status"] == "rejected_quality"
        assert state["edit_count"] == 5

    def test_cycle_edit_rejected_with_detail(self, client):
        v = version_of(client)
        v = client.post(
            "/api/v1/candidates/cand1/scope", json={"decision": "in_scope", "actor": "e", "version": v}
        ).json()["version"]
        resp = client.post(
            "/api/v1/candidates/cand1/quality",
            json={
                "action": "edit",
                "actor": "e",
                "version": v,
                "edit": {"op": "add_edge", "edge": {"source": "ascites", "target": "cirrhosis"}},
            },
        )
        assert resp.status_code == 422
        assert "cycle" in resp.json()["detail"]
        assert client.get("/api/v1/candidates/cand1").json()["edit_count"] == 0


class TestAudit:
    def test_audit_length_equals_decisions_plus_edits(self, client):
        v = version_of(client)
        v = client.post(
            "/api/v1/candidates/cand1/scope", json={"decision": "in_scope", "actor": "e", "version": v}
        ).json()["version"]
        v = client.post(
            "/api/v1/candidates/cand1/quality",
            json={
                "action": "edit",
                "actor": "e",
                "version": v,
                "edit": {"op": "replace_description", "node_id": "ascites", "description": "x"},
            },
        ).json()["version"]
        client.post(
            "/api/v1/candidates/cand1/quality", json={"action": "approve", "actor": "e", "version": v}
        )
        audit = client.get("/api/v1/candidates/cand1/audit").json()
        # created + 1 scope decision + 1 edit + 1 quality decision
        assert len(audit) == 4
