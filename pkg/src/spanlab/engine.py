"""Campaign orchestration: locking, assignment, submission, progress, jobs.

One CampaignEngine per campaign serializes every mutation behind an RLock;
reads that only need counts take the lock briefly for a snapshot and do disk
work outside it.  The CampaignManager is the process-wide registry keeping a
single engine per campaign id, which is what makes the locking meaningful.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable

from . import campaigns as ops
from .campaigns import (
    ASSIGNED,
    COMPLETED,
    FREE,
    Batch,
    CampaignConfig,
    CampaignError,
    CampaignState,
    completion_code,
)
from .ingest import (
    OutputSet,
    flatten_render_tree,
    list_datasets,
    load_dataset,
    load_outputs,
    render_example,
    get_example,
)
from .model import HUMAN, LLM, AnnotationRecord, ExampleRef, utc_now, validate_record
from .storage import CampaignStore, StorageError


def _canonical_payload(records: Iterable[AnnotationRecord]) -> str:
    """Order-independent fingerprint of a submission, for idempotency checks."""
    blobs = sorted(
        json.dumps(r.to_json(), sort_keys=True, ensure_ascii=False)
        for r in records
    )
    return "\n".join(blobs)


class CampaignEngine:
    """All mutations of one campaign's state, serialized."""

    def __init__(self, store: CampaignStore, state: CampaignState, output_text_for: Callable[[ExampleRef], str]):
        self.store = store
        self.state = state
        self._output_text_for = output_text_for
        self._lock = threading.RLock()

    @property
    def config(self) -> CampaignConfig:
        return self.state.config

    @property
    def campaign_id(self) -> str:
        return self.state.config.campaign_id

    def next_batch(self, annotator_id: str, now: datetime | None = None) -> tuple[int, tuple[ExampleRef, ...]] | None:
        if self.config.kind != HUMAN:
            raise CampaignError(
                "WRONG_CAMPAIGN_KIND",
                f"campaign {self.campaign_id!r} is not a human campaign",
            )
        now = now or utc_now()
        with self._lock:
            reclaimed = ops.reclaim_idle(self.state, now)
            batch = ops.select_next_batch(self.state, annotator_id)
            if batch is None:
                if reclaimed:
                    self.store.write_state(self.state)
                return None
            ops.assign_batch(self.state, batch, annotator_id, now)
            self.store.write_state(self.state)
            return batch.batch_idx, batch.examples

    def reclaim_idle(self, now: datetime | None = None) -> int:
        with self._lock:
            reclaimed = ops.reclaim_idle(self.state, now or utc_now())
            if reclaimed:
                self.store.write_state(self.state)
            return reclaimed

    def submit_batch(
        self,
        annotator_id: str,
        batch_idx: int,
        records: list[AnnotationRecord],
        now: datetime | None = None,
    ) -> str:
        with self._lock:
            batch = self._batch(batch_idx)
            code = completion_code(self.campaign_id, batch_idx, annotator_id, self.config.secret)
            if batch.status == COMPLETED:
                if batch.annotator_id != annotator_id:
                    raise CampaignError(
                        "NOT_ASSIGNED_TO_YOU",
                        f"batch {batch_idx} was completed by a different annotator",
                    )
                stored = self.store.load_batch_records(self.campaign_id, batch_idx) or []
                if _canonical_payload(stored) == _canonical_payload(records):
                    return code
                raise CampaignError(
                    "ALREADY_COMPLETED_CONFLICT",
                    f"batch {batch_idx} is already completed with a different payload",
                )
            if batch.status != ASSIGNED or batch.annotator_id != annotator_id:
                raise CampaignError(
                    "NOT_ASSIGNED_TO_YOU",
                    f"batch {batch_idx} is not assigned to {annotator_id!r}",
                )
            self._complete(batch, records)
            return code

    def _batch(self, batch_idx: int) -> Batch:
        if not 0 <= batch_idx < len(self.state.batches):
            raise CampaignError(
                "NOT_ASSIGNED_TO_YOU",
                f"campaign {self.campaign_id!r} has no batch {batch_idx}",
            )
        return self.state.batches[batch_idx]

    def _complete(self, batch: Batch, records: list[AnnotationRecord]) -> None:
        """Coverage + validation checks, then records-then-state persistence."""
        needed = set(batch.examples)
        got = [r.example for r in records]
        if len(got) != len(batch.examples) or set(got) != needed:
            missing = sorted(needed - set(got), key=lambda e: (e.dataset_id, e.split, e.setup_id, e.example_idx))
            raise CampaignError(
                "INCOMPLETE_BATCH",
                f"records do not cover the batch exactly ({len(got)} given, {len(batch.examples)} expected)",
                missing=[e.to_json() for e in missing],
            )
        violations = []
        for record in records:
            output_text = self._output_text_for(record.example)
            for violation in validate_record(record, output_text, self.config.categories):
                violations.append({"example": record.example.to_json(), **violation.to_json()})
        if violations:
            raise CampaignError(
                "VALIDATION_FAILED",
                f"{len(violations)} span(s) failed validation",
                violations=violations,
            )
        order = {ref: i for i, ref in enumerate(batch.examples)}
        ordered = sorted(records, key=lambda r: order[r.example])
        batch.status = COMPLETED
        if batch.annotator_id is None and records:
            batch.annotator_id = records[0].annotator_id
        self.store.persist_records(self.state, batch.batch_idx, ordered)

    def claim_batch_for_llm(self, batch_idx: int, annotator_id: str, now: datetime | None = None) -> bool:
        """Take a free batch for the model runner; False when someone beat us to it."""
        with self._lock:
            batch = self.state.batches[batch_idx]
            if batch.status != FREE:
                return False
            ops.assign_batch(self.state, batch, annotator_id, now or utc_now())
            self.store.write_state(self.state)
            return True

    def release_batch(self, batch_idx: int) -> None:
        with self._lock:
            batch = self.state.batches[batch_idx]
            if batch.status == ASSIGNED:
                ops.release_batch(self.state, batch)
                self.store.write_state(self.state)

    def complete_llm_batch(self, batch_idx: int, records: list[AnnotationRecord]) -> None:
        with self._lock:
            batch = self.state.batches[batch_idx]
            if batch.status == COMPLETED:
                return
            self._complete(batch, records)

    def progress(self) -> dict:
        """Batch counts plus span counts per category over persisted records."""
        with self._lock:
            reclaimed = ops.reclaim_idle(self.state, utc_now())
            if reclaimed:
                self.store.write_state(self.state)
            counts = ops.count_statuses(self.state)
            completed_idx = [b.batch_idx for b in self.state.batches if b.status == COMPLETED]
        per_category = {c.idx: 0 for c in self.config.categories}
        for batch_idx in completed_idx:
            for record in self.store.load_batch_records(self.campaign_id, batch_idx) or []:
                for span in record.spans:
                    per_category[span.category_idx] = per_category.get(span.category_idx, 0) + 1
        return {
            "free": counts[FREE],
            "assigned": counts[ASSIGNED],
            "completed": counts[COMPLETED],
            "total": len(self.state.batches),
            "per_category_span_counts": {str(idx): per_category[idx] for idx in sorted(per_category)},
        }

    def batches_snapshot(self) -> list[dict]:
        with self._lock:
            return [b.to_json() for b in self.state.batches]


class CampaignManager:
    """Process-wide registry: one engine per campaign, shared dataset caches."""

    def __init__(self, data_root: Path | str):
        self.data_root = Path(data_root)
        self.store = CampaignStore(self.data_root)
        self._engines: dict[str, CampaignEngine] = {}
        self._outputs: dict[tuple[str, str, str], OutputSet] = {}
        self._lock = threading.Lock()

    # -- dataset side -------------------------------------------------------

    def list_datasets(self):
        return list_datasets(self.data_root)

    def dataset(self, dataset_id: str):
        return load_dataset(self.data_root, dataset_id)

    def example_value(self, dataset_id: str, split: str, example_idx: int):
        return get_example(self.data_root, dataset_id, split, example_idx)

    def render_text(self, ref: ExampleRef) -> str:
        value = get_example(self.data_root, ref.dataset_id, ref.split, ref.example_idx)
        return flatten_render_tree(render_example(value))

    def output_set(self, dataset_id: str, split: str, setup_id: str) -> OutputSet:
        key = (dataset_id, split, setup_id)
        with self._lock:
            cached = self._outputs.get(key)
        if cached is not None:
            return cached
        outputs = load_outputs(self.data_root, dataset_id, split, setup_id)
        with self._lock:
            self._outputs.setdefault(key, outputs)
        return outputs

    def output_text(self, ref: ExampleRef) -> str:
        outputs = self.output_set(ref.dataset_id, ref.split, ref.setup_id)
        if not 0 <= ref.example_idx < len(outputs.outputs):
            raise CampaignError(
                "INDEX_OUT_OF_RANGE",
                f"no output {ref.example_idx} for {ref.dataset_id}/{ref.split}/{ref.setup_id}",
            )
        return outputs.outputs[ref.example_idx]

    # -- campaign side ------------------------------------------------------

    def enumerate_examples(self, sources) -> list[ExampleRef]:
        refs: list[ExampleRef] = []
        for src in sources:
            outputs = self.output_set(src.dataset_id, src.split, src.setup_id)
            refs.extend(
                ExampleRef(src.dataset_id, src.split, src.setup_id, i)
                for i in range(len(outputs.outputs))
            )
        return refs

    def create(self, config: CampaignConfig) -> CampaignEngine:
        examples = self.enumerate_examples(config.sources)
        if config.kind == LLM:
            # the model runner walks examples one at a time, single replica
            e, a = 1, 1
        else:
            e, a = config.examples_per_batch, config.annotators_per_example
        batches = ops.build_batches(examples, e, a, config.shuffle_seed)
        state = self.store.create(config, batches)
        engine = CampaignEngine(self.store, state, self.output_text)
        with self._lock:
            self._engines[config.campaign_id] = engine
        return engine

    def get(self, campaign_id: str) -> CampaignEngine:
        with self._lock:
            engine = self._engines.get(campaign_id)
        if engine is not None:
            return engine
        try:
            state = self.store.load(campaign_id)
        except StorageError as exc:
            if exc.code == "NOT_FOUND":
                raise CampaignError("UNKNOWN_CAMPAIGN", f"no campaign {campaign_id!r}") from exc
            raise
        with self._lock:
            # lost race: keep the first engine so there is exactly one lock
            engine = self._engines.get(campaign_id)
            if engine is None:
                engine = CampaignEngine(self.store, state, self.output_text)
                self._engines[campaign_id] = engine
        return engine

    def list_campaigns(self) -> list[CampaignEngine]:
        return [self.get(cid) for cid in self.store.list_campaigns()]
