from __future__ import annotations

import json
import time

import pytest
from starlette.testclient import TestClient

from spanlab.api import create_app
from spanlab.campaigns import completion_code
from spanlab.sample import (
    SAMPLE_FORECASTS,
    SAMPLE_SECRET,
    human_campaign_config,
    llm_campaign_config,
)

ADMIN = {"Authorization": "Bearer admintok"}


@pytest.fixture
def client(data_root, monkeypatch):
    monkeypatch.setenv("SPANLAB_ADMIN_TOKEN", "admintok")
    app = create_app(data_root)
    with TestClient(app) as tc:
        yield tc


@pytest.fixture
def human_campaign(client):
    response = client.post("/api/campaigns", json=human_campaign_config(), headers=ADMIN)
    assert response.status_code == 201
    return response.json()["campaign_id"]


def pull_batch(client, cid, annotator):
    response = client.post(f"/api/campaigns/{cid}/next?annotator={annotator}")
    assert response.status_code == 200
    return response.json()


def prefix_payload(batch, annotator, length=5):
    records = []
    for example in batch["examples"]:
        text = example["output_text"][:length]
        records.append({
            "example": example["example_ref"],
            "spans": [{"start": 0, "length": length, "category_idx": 0, "text": text, "note": None}],
        })
    return {"annotator": annotator, "batch_idx": batch["batch_idx"], "records": records}


class TestDatasets:
    def test_listing_includes_setups(self, client):
        body = client.get("/api/datasets").json()
        assert len(body) == 1
        item = body[0]
        assert item["dataset_id"] == "weather"
        assert item["splits"] == {"dev": 5}
        assert item["setups"] == {"dev": ["forecast-bot"]}

    def test_example_detail_with_setup(self, client):
        body = client.get("/api/datasets/weather/splits/dev/examples/0?setup=forecast-bot").json()
        assert body["render_tree"]["root"]["kind"] == "series"
        assert body["output_text"] == SAMPLE_FORECASTS[0]

    def test_example_detail_without_setup(self, client):
        body = client.get("/api/datasets/weather/splits/dev/examples/1").json()
        assert body["output_text"] is None

    def test_example_out_of_range(self, client):
        response = client.get("/api/datasets/weather/splits/dev/examples/99")
        assert response.status_code == 404
        assert response.json()["code"] == "INDEX_OUT_OF_RANGE"

    def test_unknown_dataset(self, client):
        response = client.get("/api/datasets/ghost/splits/dev/examples/0")
        assert response.status_code == 404
        assert response.json()["code"] == "MISSING_META"

    def test_unknown_setup(self, client):
        response = client.get("/api/datasets/weather/splits/dev/examples/0?setup=ghost")
        assert response.status_code == 404
        assert response.json()["code"] == "MISSING_FILE"


class TestCampaignLifecycle:
    def test_create_requires_admin_token(self, client):
        assert client.post("/api/campaigns", json=human_campaign_config()).status_code == 401
        bad = {"Authorization": "Bearer wrong"}
        response = client.post("/api/campaigns", json=human_campaign_config(), headers=bad)
        assert response.status_code == 401
        assert response.json()["code"] == "UNAUTHORIZED"

    def test_create_and_list(self, client, human_campaign):
        listing = client.get("/api/campaigns").json()
        assert [c["campaign_id"] for c in listing] == [human_campaign]
        assert listing[0]["kind"] == "human"
        assert listing[0]["batch_count"] == 3

    def test_create_duplicate_conflicts(self, client, human_campaign):
        response = client.post("/api/campaigns", json=human_campaign_config(), headers=ADMIN)
        assert response.status_code == 409
        assert response.json()["code"] == "CAMPAIGN_EXISTS"

    def test_create_rejects_bad_config(self, client):
        bad = human_campaign_config()
        bad["examples_per_batch"] = 0
        response = client.post("/api/campaigns", json=bad, headers=ADMIN)
        assert response.status_code == 400
        assert response.json()["code"] == "BAD_REQUEST"

    def test_create_rejects_non_object_body(self, client):
        response = client.post("/api/campaigns", content=b'"nope"',
                               headers={**ADMIN, "content-type": "application/json"})
        assert response.status_code == 400
        assert response.json()["code"] == "BAD_REQUEST"

    def test_detail_hides_secret(self, client, human_campaign):
        body = client.get(f"/api/campaigns/{human_campaign}").json()
        assert body["campaign_id"] == human_campaign
        assert "secret" not in json.dumps(body)
        assert [c["label"] for c in body["categories"]] == [
            "incorrect fact", "fact not checkable", "misleading fact",
        ]

    def test_unknown_campaign_is_404_everywhere(self, client):
        for path in ["/api/campaigns/ghost", "/api/campaigns/ghost/progress",
                     "/api/campaigns/ghost/batches", "/api/campaigns/ghost/records",
                     "/api/campaigns/ghost/llm/status", "/api/campaigns/ghost/export"]:
            response = client.get(path)
            assert response.status_code == 404, path
            assert response.json()["code"] in {"UNKNOWN_CAMPAIGN", "NOT_FOUND"}
        response = client.post("/api/campaigns/ghost/next?annotator=a1")
        assert response.status_code == 404


class TestAnnotatorFlow:
    def test_next_requires_annotator(self, client, human_campaign):
        response = client.post(f"/api/campaigns/{human_campaign}/next")
        assert response.status_code == 400
        assert response.json()["code"] == "BAD_REQUEST"

    def test_next_returns_full_payload(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        assert batch["batch_idx"] == 0
        assert len(batch["examples"]) == 2
        example = batch["examples"][0]
        assert example["render_tree"]["root"]["kind"] == "series"
        assert example["output_text"] in SAMPLE_FORECASTS
        assert [c["label"] for c in batch["categories"]] == [
            "incorrect fact", "fact not checkable", "misleading fact",
        ]
        assert batch["instructions"]

    def test_next_on_llm_campaign_conflicts(self, client, mock_model):
        server = mock_model("valid")
        client.post("/api/campaigns", json=llm_campaign_config(server.base_url), headers=ADMIN)
        response = client.post("/api/campaigns/weather-llm/next?annotator=a1")
        assert response.status_code == 409
        assert response.json()["code"] == "WRONG_CAMPAIGN_KIND"

    def test_exhaustion_yields_204(self, client, human_campaign):
        for _ in range(3):
            batch = pull_batch(client, human_campaign, "solo")
            code = client.post(f"/api/campaigns/{human_campaign}/save",
                               json=prefix_payload(batch, "solo")).json()
            assert "completion_code" in code
        response = client.post(f"/api/campaigns/{human_campaign}/next?annotator=solo")
        assert response.status_code == 204
        assert response.content == b""

    def test_save_returns_verifiable_code(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        response = client.post(f"/api/campaigns/{human_campaign}/save",
                               json=prefix_payload(batch, "a1"))
        assert response.status_code == 200
        code = response.json()["completion_code"]
        assert code == completion_code(human_campaign, batch["batch_idx"], "a1", SAMPLE_SECRET)

    def test_save_is_idempotent_then_conflicts(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        payload = prefix_payload(batch, "a1")
        first = client.post(f"/api/campaigns/{human_campaign}/save", json=payload).json()
        second = client.post(f"/api/campaigns/{human_campaign}/save", json=payload).json()
        assert first == second
        changed = prefix_payload(batch, "a1", length=3)
        response = client.post(f"/api/campaigns/{human_campaign}/save", json=changed)
        assert response.status_code == 409
        assert response.json()["code"] == "ALREADY_COMPLETED_CONFLICT"

    def test_save_with_wrong_text_is_422_with_violations(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        payload = prefix_payload(batch, "a1")
        payload["records"][0]["spans"][0]["text"] = "WRONG"
        response = client.post(f"/api/campaigns/{human_campaign}/save", json=payload)
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "VALIDATION_FAILED"
        assert body["violations"][0]["code"] == "TEXT_MISMATCH"

    def test_save_missing_record_is_incomplete(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        payload = prefix_payload(batch, "a1")
        payload["records"] = payload["records"][:1]
        response = client.post(f"/api/campaigns/{human_campaign}/save", json=payload)
        assert response.status_code == 422
        assert response.json()["code"] == "INCOMPLETE_BATCH"

    def test_save_unassigned_batch_conflicts(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        payload = prefix_payload(batch, "a1")
        payload["batch_idx"] = 2
        response = client.post(f"/api/campaigns/{human_campaign}/save", json=payload)
        assert response.status_code == 409
        assert response.json()["code"] == "NOT_ASSIGNED_TO_YOU"

    def test_save_rejects_malformed_payloads(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        for payload in [
            {"annotator": "a1"},
            {"annotator": "", "batch_idx": 0, "records": []},
            {"annotator": "a1", "batch_idx": "0", "records": []},
            {"annotator": "a1", "batch_idx": 0, "records": [{"example": {"nope": 1}, "spans": []}]},
            {"annotator": "a1", "batch_idx": 0,
             "records": [{"example": batch["examples"][0]["example_ref"],
                          "spans": [{"start": 0, "length": "1", "category_idx": 0, "text": "x"}]}]},
        ]:
            response = client.post(f"/api/campaigns/{human_campaign}/save", json=payload)
            assert response.status_code == 400, payload
            assert response.json()["code"] == "BAD_REQUEST"

    def test_save_negative_start_fails_validation_not_parsing(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        payload = prefix_payload(batch, "a1")
        payload["records"][0]["spans"] = [
            {"start": -1, "length": 1, "category_idx": 0, "text": "x", "note": None},
        ]
        response = client.post(f"/api/campaigns/{human_campaign}/save", json=payload)
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "VALIDATION_FAILED"
        assert body["violations"][0]["code"] == "OUT_OF_BOUNDS"

    def test_save_body_must_be_json_object(self, client, human_campaign):
        response = client.post(f"/api/campaigns/{human_campaign}/save", content=b"[5]",
                               headers={"content-type": "application/json"})
        assert response.status_code == 400
        assert response.json()["code"] == "BAD_REQUEST"


class TestProgressAndRecords:
    def test_progress_counts(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        client.post(f"/api/campaigns/{human_campaign}/save", json=prefix_payload(batch, "a1"))
        progress = client.get(f"/api/campaigns/{human_campaign}/progress").json()
        assert progress["completed"] == 1
        assert progress["total"] == 3
        assert progress["per_category_span_counts"]["0"] == 2

    def test_batches_snapshot_shape(self, client, human_campaign):
        pull_batch(client, human_campaign, "a1")
        snapshot = client.get(f"/api/campaigns/{human_campaign}/batches").json()
        assert len(snapshot) == 3
        assert snapshot[0]["status"] == "assigned"
        assert snapshot[0]["annotator_id"] == "a1"
        assert snapshot[1]["status"] == "free"

    def test_records_include_output_text(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        client.post(f"/api/campaigns/{human_campaign}/save", json=prefix_payload(batch, "a1"))
        records = client.get(f"/api/campaigns/{human_campaign}/records").json()
        assert len(records) == 2
        for record in records:
            assert record["annotator_id"] == "a1"
            assert record["output_text"] == SAMPLE_FORECASTS[record["example"]["example_idx"]]
            assert record["spans"][0]["text"] == record["output_text"][:5]


class TestStatelessness:
    def test_new_app_instance_sees_prior_state(self, data_root, monkeypatch):
        monkeypatch.setenv("SPANLAB_ADMIN_TOKEN", "admintok")
        with TestClient(create_app(data_root)) as first:
            first.post("/api/campaigns", json=human_campaign_config(), headers=ADMIN)
            batch = pull_batch(first, "weather-human", "a1")
            code = first.post("/api/campaigns/weather-human/save",
                              json=prefix_payload(batch, "a1")).json()["completion_code"]
        with TestClient(create_app(data_root)) as second:
            progress = second.get("/api/campaigns/weather-human/progress").json()
            assert progress["completed"] == 1
            replay = second.post("/api/campaigns/weather-human/save",
                                 json=prefix_payload(batch, "a1")).json()["completion_code"]
            assert replay == code
            next_batch = pull_batch(second, "weather-human", "a1")
            assert next_batch["batch_idx"] == 1


class TestLlmEndpoints:
    def wait_for(self, client, cid, state, timeout=15.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            body = client.get(f"/api/campaigns/{cid}/llm/status").json()
            if body["state"] == state:
                return body
            time.sleep(0.05)
        raise AssertionError(f"job never reached {state!r}: {body}")

    def test_start_runs_to_finished(self, client, mock_model):
        server = mock_model("valid")
        client.post("/api/campaigns", json=llm_campaign_config(server.base_url), headers=ADMIN)
        response = client.post("/api/campaigns/weather-llm/llm/start", headers=ADMIN)
        assert response.status_code == 202
        assert response.json()["state"] == "running"
        body = self.wait_for(client, "weather-llm", "finished")
        assert body["completed_count"] == 5
        assert body["error_count"] == 0
        progress = client.get("/api/campaigns/weather-llm/progress").json()
        assert progress["completed"] == 5

    def test_start_requires_admin(self, client, mock_model):
        server = mock_model("valid")
        client.post("/api/campaigns", json=llm_campaign_config(server.base_url), headers=ADMIN)
        assert client.post("/api/campaigns/weather-llm/llm/start").status_code == 401

    def test_start_on_human_campaign_conflicts(self, client, human_campaign):
        response = client.post(f"/api/campaigns/{human_campaign}/llm/start", headers=ADMIN)
        assert response.status_code == 409
        assert response.json()["code"] == "WRONG_CAMPAIGN_KIND"

    def test_double_start_conflicts_then_restart_after_finish(self, client, mock_model):
        server = mock_model("valid")
        client.post("/api/campaigns", json=llm_campaign_config(server.base_url), headers=ADMIN)
        client.post("/api/campaigns/weather-llm/llm/start", headers=ADMIN)
        second = client.post("/api/campaigns/weather-llm/llm/start", headers=ADMIN)
        assert second.status_code in {202, 409}
        self.wait_for(client, "weather-llm", "finished")
        third = client.post("/api/campaigns/weather-llm/llm/start", headers=ADMIN)
        assert third.status_code == 202
        self.wait_for(client, "weather-llm", "finished")

    def test_stop_is_idempotent(self, client, mock_model):
        server = mock_model("valid")
        client.post("/api/campaigns", json=llm_campaign_config(server.base_url), headers=ADMIN)
        body = client.post("/api/campaigns/weather-llm/llm/stop", headers=ADMIN).json()
        assert body["state"] == "idle"
        client.post("/api/campaigns/weather-llm/llm/start", headers=ADMIN)
        first = client.post("/api/campaigns/weather-llm/llm/stop", headers=ADMIN)
        second = client.post("/api/campaigns/weather-llm/llm/stop", headers=ADMIN)
        assert first.status_code == second.status_code == 200

    def test_status_idle_before_any_start(self, client, mock_model):
        server = mock_model("valid")
        client.post("/api/campaigns", json=llm_campaign_config(server.base_url), headers=ADMIN)
        body = client.get("/api/campaigns/weather-llm/llm/status").json()
        assert body == {"state": "idle", "completed_count": 0, "error_count": 0}


class TestExport:
    def test_jsonl_export_with_attachment(self, client, human_campaign):
        batch = pull_batch(client, human_campaign, "a1")
        client.post(f"/api/campaigns/{human_campaign}/save", json=prefix_payload(batch, "a1"))
        response = client.get(f"/api/campaigns/{human_campaign}/export?format=jsonl")
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("application/x-ndjson")
        assert response.headers["content-disposition"] == f'attachment; filename="{human_campaign}.jsonl"'
        lines = response.text.splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["annotator_kind"] == "human"

    def test_csv_export(self, client, human_campaign):
        response = client.get(f"/api/campaigns/{human_campaign}/export?format=csv")
        assert response.headers["content-type"].startswith("text/csv")
        assert response.text.startswith("campaign_id,dataset,split,setup,")

    def test_bad_format_rejected(self, client, human_campaign):
        response = client.get(f"/api/campaigns/{human_campaign}/export?format=xml")
        assert response.status_code == 400
        assert response.json()["code"] == "BAD_FORMAT"


class TestUiPages:
    def test_pages_serve_html(self, client, human_campaign):
        for path in ["/", f"/annotate/{human_campaign}", f"/monitor/{human_campaign}"]:
            response = client.get(path)
            assert response.status_code == 200, path
            assert response.headers["content-type"].startswith("text/html")

    def test_static_dir_served_when_present(self, data_root, tmp_path_factory, monkeypatch):
        monkeypatch.setenv("SPANLAB_ADMIN_TOKEN", "admintok")
        static = tmp_path_factory.mktemp("static")
        (static / "index.html").write_text("<html><body>spanlab ui</body></html>", "utf-8")
        (static / "assets").mkdir()
        (static / "assets" / "app.js").write_text("console.log(1)", "utf-8")
        with TestClient(create_app(data_root, static_dir=static)) as tc:
            assert "spanlab ui" in tc.get("/").text
            assert tc.get("/assets/app.js").status_code == 200
