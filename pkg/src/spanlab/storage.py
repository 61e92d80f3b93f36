"""File-backed campaign persistence.

Layout under a data root:

    campaigns/{campaign_id}/config.json
    campaigns/{campaign_id}/state.json
    campaigns/{campaign_id}/records/{batch_idx}.jsonl

Every write goes to a temp file in the destination directory followed by an
atomic rename, so readers never observe a half-written file.  Record files
are append-only at the batch level (one file per completed batch, written
once) and win over state.json when the two disagree after a crash.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterator

from .campaigns import COMPLETED, FREE, Batch, CampaignConfig, CampaignState
from .errors import SpanlabError
from .model import AnnotationRecord, format_timestamp, parse_timestamp, utc_now


class StorageError(SpanlabError):
    pass


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _dump_json(value: dict) -> bytes:
    return (json.dumps(value, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


class CampaignStore:
    """Owns the on-disk campaign tree; knows nothing about locking."""

    def __init__(self, data_root: Path | str):
        self.data_root = Path(data_root)
        # test seam: called between the records write and the state write
        self._after_records_write: Callable[[], None] | None = None

    @property
    def campaigns_root(self) -> Path:
        return self.data_root / "campaigns"

    def campaign_dir(self, campaign_id: str) -> Path:
        return self.campaigns_root / campaign_id

    def exists(self, campaign_id: str) -> bool:
        return (self.campaign_dir(campaign_id) / "config.json").is_file()

    def list_campaigns(self) -> list[str]:
        root = self.campaigns_root
        if not root.is_dir():
            return []
        return sorted(p.name for p in root.iterdir() if (p / "config.json").is_file())

    def create(self, config: CampaignConfig, batches: list[Batch], created_at: datetime | None = None) -> CampaignState:
        """Materialize a new campaign; config.json lands last as the commit point."""
        if self.exists(config.campaign_id):
            raise StorageError("CAMPAIGN_EXISTS", f"campaign {config.campaign_id!r} already exists")
        created_at = created_at or utc_now()
        state = CampaignState(config=config, batches=batches, created_at=created_at)
        state.rebuild_history()
        directory = self.campaign_dir(config.campaign_id)
        try:
            (directory / "records").mkdir(parents=True, exist_ok=True)
            self.write_state(state)
            _atomic_write_bytes(directory / "config.json", _dump_json(config.to_json()))
        except OSError as exc:
            raise StorageError("IO_ERROR", f"cannot create campaign {config.campaign_id!r}: {exc}") from exc
        return state

    def write_state(self, state: CampaignState) -> None:
        payload = {
            "created_at": format_timestamp(state.created_at),
            "batches": [b.to_json() for b in state.batches],
        }
        path = self.campaign_dir(state.config.campaign_id) / "state.json"
        try:
            _atomic_write_bytes(path, _dump_json(payload))
        except OSError as exc:
            raise StorageError("IO_ERROR", f"cannot write state for {state.config.campaign_id!r}: {exc}") from exc

    def records_path(self, campaign_id: str, batch_idx: int) -> Path:
        return self.campaign_dir(campaign_id) / "records" / f"{batch_idx}.jsonl"

    def persist_records(self, state: CampaignState, batch_idx: int, records: list[AnnotationRecord]) -> None:
        """Write a completed batch: records first, then the state snapshot.

        A crash after the first write leaves a record file that state.json
        does not yet acknowledge; load() reconciles in the records' favor, so
        the ordering makes submitted annotations durable at the earliest
        possible moment.
        """
        campaign_id = state.config.campaign_id
        lines = "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in records)
        try:
            _atomic_write_bytes(self.records_path(campaign_id, batch_idx), lines.encode("utf-8"))
        except OSError as exc:
            raise StorageError("IO_ERROR", f"cannot write records for batch {batch_idx}: {exc}") from exc
        if self._after_records_write is not None:
            self._after_records_write()
        self.write_state(state)

    def load_batch_records(self, campaign_id: str, batch_idx: int) -> list[AnnotationRecord] | None:
        """Records of one batch, or None when the file is absent or unreadable."""
        path = self.records_path(campaign_id, batch_idx)
        try:
            raw = path.read_text("utf-8")
        except FileNotFoundError:
            return None
        except OSError:
            return None
        records = []
        for line in raw.splitlines():
            if not line.strip():
                continue
            try:
                records.append(AnnotationRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                return None
        return records or None

    def load(self, campaign_id: str) -> CampaignState:
        """Rebuild in-memory state, reconciling state.json against record files.

        A batch whose record file exists and covers its examples is completed
        no matter what state.json says; a batch marked completed without such
        a file reverts to free.  Everything else is taken from state.json.
        """
        directory = self.campaign_dir(campaign_id)
        config_path = directory / "config.json"
        if not config_path.is_file():
            raise StorageError("NOT_FOUND", f"no campaign {campaign_id!r} under {self.campaigns_root}")
        try:
            config = CampaignConfig.from_json(json.loads(config_path.read_text("utf-8")))
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise StorageError("CORRUPT_CONFIG", f"unreadable config for {campaign_id!r}: {exc}") from exc
        state_path = directory / "state.json"
        try:
            raw = json.loads(state_path.read_text("utf-8"))
            batches = [Batch.from_json(b) for b in raw["batches"]]
            created_at = parse_timestamp(raw["created_at"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise StorageError("CORRUPT_STATE", f"unreadable state for {campaign_id!r}: {exc}") from exc
        for batch in batches:
            records = self.load_batch_records(campaign_id, batch.batch_idx)
            if records is not None and self._covers(batch, records):
                if batch.status != COMPLETED:
                    batch.status = COMPLETED
                    batch.annotator_id = records[0].annotator_id
            elif batch.status == COMPLETED:
                batch.status = FREE
                batch.annotator_id = None
                batch.assigned_at = None
        state = CampaignState(config=config, batches=batches, created_at=created_at)
        state.rebuild_history()
        return state

    @staticmethod
    def _covers(batch: Batch, records: list[AnnotationRecord]) -> bool:
        return len(records) == len(batch.examples) and {r.example for r in records} == set(batch.examples)

    def iter_completed_records(self, state: CampaignState) -> Iterator[tuple[int, list[AnnotationRecord]]]:
        campaign_id = state.config.campaign_id
        for batch in sorted(state.batches, key=lambda b: b.batch_idx):
            if batch.status != COMPLETED:
                continue
            records = self.load_batch_records(campaign_id, batch.batch_idx)
            if records:
                yield batch.batch_idx, records

    def export(self, campaign_id: str, fmt: str) -> bytes:
        """Flatten completed batches to jsonl (one record per line) or csv (one span per row)."""
        state = self.load(campaign_id)
        records = [r for _, batch_records in self.iter_completed_records(state) for r in batch_records]
        if fmt == "jsonl":
            return "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in records).encode("utf-8")
        if fmt == "csv":
            labels = {c.idx: c.label for c in state.config.categories}
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\r\n")
            writer.writerow([
                "campaign_id", "dataset", "split", "setup", "example_idx",
                "annotator_id", "annotator_kind", "start", "length",
                "category_idx", "category_label", "text", "note",
            ])
            for record in records:
                for span in record.spans:
                    writer.writerow([
                        record.campaign_id,
                        record.example.dataset_id,
                        record.example.split,
                        record.example.setup_id,
                        record.example.example_idx,
                        record.annotator_id,
                        record.annotator_kind,
                        span.start,
                        span.length,
                        span.category_idx,
                        labels.get(span.category_idx, ""),
                        span.text,
                        span.note if span.note is not None else "",
                    ])
            return buf.getvalue().encode("utf-8")
        raise StorageError("BAD_FORMAT", f"unknown export format {fmt!r} (want jsonl or csv)")
