"""Shared builders for the test suite."""

from __future__ import annotations

import json
from pathlib import Path

from spanlab.model import HUMAN, AnnotationRecord, Category, ExampleRef, SpanAnnotation, utc_now

CATS = (
    Category(0, "incorrect fact", "#e45756"),
    Category(1, "fact not checkable", "#f2a93b"),
    Category(2, "misleading fact", "#7b61c4"),
)


def ref(idx: int, dataset: str = "weather", split: str = "dev", setup: str = "forecast-bot") -> ExampleRef:
    return ExampleRef(dataset, split, setup, idx)


def span(start: int, length: int, text: str, category_idx: int = 0, note: str | None = None) -> SpanAnnotation:
    return SpanAnnotation(start=start, length=length, category_idx=category_idx, text=text, note=note)


def record(
    example: ExampleRef,
    spans: tuple[SpanAnnotation, ...] = (),
    campaign_id: str = "weather-human",
    annotator_id: str = "a1",
) -> AnnotationRecord:
    now = utc_now()
    return AnnotationRecord(
        campaign_id=campaign_id,
        example=example,
        annotator_id=annotator_id,
        annotator_kind=HUMAN,
        spans=spans,
        started_at=now,
        finished_at=now,
    )


def write_dataset(root: Path, dataset_id: str, loader_kind: str, splits: dict[str, str], description: str = "") -> Path:
    """Lay a dataset directory out on disk; split values are raw file contents."""
    directory = root / "datasets" / dataset_id
    directory.mkdir(parents=True, exist_ok=True)
    meta = {"loader_kind": loader_kind, "splits": list(splits), "description": description}
    (directory / "meta.json").write_text(json.dumps(meta), encoding="utf-8")
    ext = {"jsonl": "jsonl", "csv": "csv", "text": "txt"}[loader_kind]
    for split, content in splits.items():
        (directory / f"{split}.{ext}").write_text(content, encoding="utf-8")
    return directory


def write_outputs(root: Path, dataset_id: str, split: str, setup_id: str, rows: list[dict]) -> Path:
    directory = root / "outputs" / dataset_id / split
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{setup_id}.jsonl"
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def prefix_records(engine, refs, annotator_id: str, length: int = 5) -> list[AnnotationRecord]:
    """One record per example, each annotating the first `length` code points."""
    records = []
    for r in refs:
        text = engine._output_text_for(r)
        records.append(record(
            r,
            spans=(span(0, length, text[:length], category_idx=0),),
            campaign_id=engine.campaign_id,
            annotator_id=annotator_id,
        ))
    return records
