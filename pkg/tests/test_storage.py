from __future__ import annotations

import csv
import io
import json
from datetime import timedelta

import pytest

from helpers import CATS, record, ref, span
from spanlab.campaigns import (
    ASSIGNED,
    COMPLETED,
    FREE,
    Batch,
    CampaignConfig,
    CampaignState,
    SourceRef,
)
from spanlab.model import utc_now
from spanlab.storage import CampaignStore, StorageError


def make_config(campaign_id="demo", **overrides) -> CampaignConfig:
    base = dict(
        campaign_id=campaign_id,
        kind="human",
        sources=(SourceRef("weather", "dev", "forecast-bot"),),
        categories=CATS,
        examples_per_batch=2,
        annotators_per_example=1,
        idle_timeout_s=600,
        shuffle_seed=13,
        secret="s",
    )
    base.update(overrides)
    return CampaignConfig(**base)


def make_batches(*example_groups) -> list[Batch]:
    return [Batch(i, tuple(ref(j) for j in group)) for i, group in enumerate(example_groups)]


def batch_records(batch: Batch, annotator_id="a1"):
    return [record(example=e, annotator_id=annotator_id, spans=()) for e in batch.examples]


@pytest.fixture
def store(tmp_path) -> CampaignStore:
    return CampaignStore(tmp_path)


@pytest.fixture
def seeded(store) -> CampaignState:
    return store.create(make_config(), make_batches([0, 1], [2, 3]))


class TestCreateAndList:
    def test_create_writes_layout(self, store, seeded, tmp_path):
        root = tmp_path / "campaigns" / "demo"
        assert (root / "config.json").is_file()
        assert (root / "state.json").is_file()
        assert (root / "records").is_dir()

    def test_create_twice_conflicts(self, store, seeded):
        with pytest.raises(StorageError) as exc:
            store.create(make_config(), make_batches([0]))
        assert exc.value.code == "CAMPAIGN_EXISTS"

    def test_list_campaigns_sorted(self, store):
        for cid in ["zeta", "alpha", "mid"]:
            store.create(make_config(campaign_id=cid), make_batches([0]))
        assert store.list_campaigns() == ["alpha", "mid", "zeta"]

    def test_stray_dir_without_config_ignored(self, store, seeded, tmp_path):
        (tmp_path / "campaigns" / "junk").mkdir()
        assert store.list_campaigns() == ["demo"]

    def test_no_leftover_temp_files(self, store, seeded, tmp_path):
        state = store.load("demo")
        state.batches[0].status = ASSIGNED
        state.batches[0].annotator_id = "a1"
        state.batches[0].assigned_at = utc_now()
        store.write_state(state)
        names = {p.name for p in (tmp_path / "campaigns" / "demo").iterdir()}
        assert names == {"config.json", "state.json", "records"}


class TestRoundTrip:
    def test_fresh_state_round_trips(self, store, seeded):
        loaded = store.load("demo")
        assert loaded.config == seeded.config
        assert [b.to_json() for b in loaded.batches] == [b.to_json() for b in seeded.batches]

    def test_assignment_round_trips(self, store, seeded):
        now = utc_now()
        seeded.batches[1].status = ASSIGNED
        seeded.batches[1].annotator_id = "bob"
        seeded.batches[1].assigned_at = now
        store.write_state(seeded)
        loaded = store.load("demo")
        batch = loaded.batches[1]
        assert (batch.status, batch.annotator_id) == (ASSIGNED, "bob")
        assert abs((batch.assigned_at - now).total_seconds()) < 0.001
        assert loaded.annotator_history["bob"] == set(batch.examples)

    def test_completed_batch_round_trips_with_records(self, store, seeded):
        batch = seeded.batches[0]
        batch.status = COMPLETED
        batch.annotator_id = "a1"
        records = batch_records(batch)
        store.persist_records(seeded, 0, records)
        loaded = store.load("demo")
        assert loaded.batches[0].status == COMPLETED
        assert loaded.batches[0].annotator_id == "a1"
        stored = store.load_batch_records("demo", 0)
        assert [r.to_json() for r in stored] == [r.to_json() for r in records]

    def test_records_file_is_one_json_object_per_line(self, store, seeded):
        batch = seeded.batches[0]
        batch.status = COMPLETED
        store.persist_records(seeded, 0, batch_records(batch))
        lines = store.records_path("demo", 0).read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        for line in lines:
            assert isinstance(json.loads(line), dict)


class TestLoadErrors:
    def test_unknown_campaign(self, store):
        with pytest.raises(StorageError) as exc:
            store.load("ghost")
        assert exc.value.code == "NOT_FOUND"

    def test_corrupt_config(self, store, seeded, tmp_path):
        (tmp_path / "campaigns" / "demo" / "config.json").write_text("{nope", encoding="utf-8")
        with pytest.raises(StorageError) as exc:
            store.load("demo")
        assert exc.value.code == "CORRUPT_CONFIG"

    def test_corrupt_state(self, store, seeded, tmp_path):
        (tmp_path / "campaigns" / "demo" / "state.json").write_text("[]", encoding="utf-8")
        with pytest.raises(StorageError) as exc:
            store.load("demo")
        assert exc.value.code == "CORRUPT_STATE"


class TestReconciliation:
    def complete_on_disk(self, store, state, batch_idx, annotator_id="a1"):
        batch = state.batches[batch_idx]
        batch.status = COMPLETED
        batch.annotator_id = annotator_id
        store.persist_records(state, batch_idx, batch_records(batch, annotator_id))

    def test_record_file_wins_over_stale_state(self, store, seeded):
        batch = seeded.batches[0]
        records = batch_records(batch, "carol")
        path = store.records_path("demo", 0)
        with path.open("w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r.to_json()) + "\n")
        loaded = store.load("demo")
        assert loaded.batches[0].status == COMPLETED
        assert loaded.batches[0].annotator_id == "carol"
        assert loaded.annotator_history["carol"] == set(batch.examples)

    def test_state_completed_without_file_reverts_to_free(self, store, seeded):
        seeded.batches[1].status = COMPLETED
        seeded.batches[1].annotator_id = "a1"
        store.write_state(seeded)
        loaded = store.load("demo")
        batch = loaded.batches[1]
        assert (batch.status, batch.annotator_id, batch.assigned_at) == (FREE, None, None)
        assert "a1" not in loaded.annotator_history

    def test_corrupt_record_line_treated_as_missing(self, store, seeded):
        self.complete_on_disk(store, seeded, 0)
        path = store.records_path("demo", 0)
        lines = path.read_text(encoding="utf-8").splitlines()
        lines[1] = "{broken"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        loaded = store.load("demo")
        assert loaded.batches[0].status == FREE

    def test_partial_record_file_does_not_count(self, store, seeded):
        self.complete_on_disk(store, seeded, 0)
        path = store.records_path("demo", 0)
        first_line = path.read_text(encoding="utf-8").splitlines()[0]
        path.write_text(first_line + "\n", encoding="utf-8")
        loaded = store.load("demo")
        assert loaded.batches[0].status == FREE

    def test_records_for_wrong_examples_do_not_count(self, store, seeded):
        wrong = [record(example=ref(7), spans=()), record(example=ref(8), spans=())]
        path = store.records_path("demo", 0)
        with path.open("w", encoding="utf-8") as fh:
            for r in wrong:
                fh.write(json.dumps(r.to_json()) + "\n")
        loaded = store.load("demo")
        assert loaded.batches[0].status == FREE

    def test_empty_record_file_does_not_count(self, store, seeded):
        store.records_path("demo", 0).write_text("", encoding="utf-8")
        assert store.load("demo").batches[0].status == FREE

    def test_crash_between_records_and_state_recovers_as_completed(self, store, seeded):
        batch = seeded.batches[0]
        batch.status = COMPLETED
        batch.annotator_id = "a1"

        class Boom(RuntimeError):
            pass

        def crash():
            raise Boom()

        store._after_records_write = crash
        with pytest.raises(Boom):
            store.persist_records(seeded, 0, batch_records(batch))
        store._after_records_write = None
        loaded = store.load("demo")
        assert loaded.batches[0].status == COMPLETED
        assert loaded.batches[0].annotator_id == "a1"
        assert loaded.batches[1].status == FREE

    def test_assigned_batches_survive_reload_untouched(self, store, seeded):
        seeded.batches[0].status = ASSIGNED
        seeded.batches[0].annotator_id = "dave"
        seeded.batches[0].assigned_at = utc_now() - timedelta(seconds=30)
        store.write_state(seeded)
        loaded = store.load("demo")
        assert loaded.batches[0].status == ASSIGNED
        assert loaded.batches[0].annotator_id == "dave"


class TestExport:
    @pytest.fixture
    def completed(self, store, seeded) -> CampaignState:
        for idx in (1, 0):
            batch = seeded.batches[idx]
            batch.status = COMPLETED
            batch.annotator_id = "a1"
            spans = (span(start=0, length=1, category_idx=idx, text="S"),)
            records = [record(example=e, spans=spans) for e in batch.examples]
            store.persist_records(seeded, idx, records)
        return seeded

    def test_jsonl_is_batch_ordered_records(self, store, completed):
        lines = store.export("demo", "jsonl").decode("utf-8").splitlines()
        assert len(lines) == 4
        idxs = [json.loads(line)["example"]["example_idx"] for line in lines]
        assert idxs == [0, 1, 2, 3]

    def test_jsonl_lines_parse_back_to_records(self, store, completed):
        from spanlab.model import AnnotationRecord

        for line in store.export("demo", "jsonl").decode("utf-8").splitlines():
            rec = AnnotationRecord.from_json(json.loads(line))
            assert rec.campaign_id == "weather-human"

    def test_csv_header_always_present(self, store, seeded):
        body = store.export("demo", "csv").decode("utf-8")
        assert body == (
            "campaign_id,dataset,split,setup,example_idx,annotator_id,annotator_kind,"
            "start,length,category_idx,category_label,text,note\r\n"
        )

    def test_csv_one_row_per_span(self, store, completed):
        rows = list(csv.DictReader(io.StringIO(store.export("demo", "csv").decode("utf-8"))))
        assert len(rows) == 4
        first = rows[0]
        assert first["example_idx"] == "0"
        assert first["category_label"] == "incorrect fact"
        assert first["note"] == ""
        assert {r["category_idx"] for r in rows} == {"0", "1"}

    def test_csv_quotes_hostile_text(self, store, seeded):
        batch = seeded.batches[0]
        batch.status = COMPLETED
        batch.annotator_id = "a1"
        hostile = 'say "hi",\nplease'
        records = [
            record(example=e, spans=(span(start=0, length=2, text=hostile, note="n,1"),))
            for e in batch.examples
        ]
        store.persist_records(seeded, 0, records)
        body = store.export("demo", "csv").decode("utf-8")
        rows = list(csv.reader(io.StringIO(body)))
        assert rows[1][11] == hostile
        assert rows[1][12] == "n,1"

    def test_record_without_spans_contributes_no_csv_rows(self, store, seeded):
        batch = seeded.batches[0]
        batch.status = COMPLETED
        batch.annotator_id = "a1"
        store.persist_records(seeded, 0, batch_records(batch))
        rows = store.export("demo", "csv").decode("utf-8").splitlines()
        assert len(rows) == 1

    def test_unknown_format_rejected(self, store, seeded):
        with pytest.raises(StorageError) as exc:
            store.export("demo", "xml")
        assert exc.value.code == "BAD_FORMAT"

    def test_export_deterministic(self, store, completed):
        assert store.export("demo", "jsonl") == store.export("demo", "jsonl")
        assert store.export("demo", "csv") == store.export("demo", "csv")
