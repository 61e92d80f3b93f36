"""Shared domain types: examples, categories, spans, annotation records.

Offset convention used everywhere in this package: span offsets count
Unicode code points from the start of the annotated output text.  Not bytes,
not UTF-16 units.  Python strings are code-point sequences, so ``len`` and
slicing already operate in the right unit; the browser front end converts
from UTF-16 at its boundary.

All types here are immutable values and all operations are pure functions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable

SLUG_RE = re.compile(r"[a-z0-9_-]{1,64}")
COLOR_RE = re.compile(r"#[0-9a-fA-F]{6}")

HUMAN = "human"
LLM = "llm"

# validate_record reason codes
OUT_OF_BOUNDS = "OUT_OF_BOUNDS"
TEXT_MISMATCH = "TEXT_MISMATCH"
BAD_CATEGORY = "BAD_CATEGORY"


def code_point_length(text: str) -> int:
    """Count of Unicode scalar values in ``text``."""
    return len(text)


def is_slug(value: Any) -> bool:
    return isinstance(value, str) and SLUG_RE.fullmatch(value) is not None


def _require_slug(value: Any, name: str) -> None:
    if not is_slug(value):
        raise ValueError(f"{name} must match [a-z0-9_-]{{1,64}}, got {value!r}")


def utc_now() -> datetime:
    """Current UTC time truncated to whole seconds (the storage precision)."""
    return datetime.now(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware UTC")
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(raw: str) -> datetime:
    return datetime.strptime(raw, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


@dataclass(frozen=True)
class ExampleRef:
    """One model output: dataset/split, producing system, and example index."""

    dataset_id: str
    split: str
    setup_id: str
    example_idx: int

    def __post_init__(self):
        _require_slug(self.dataset_id, "dataset_id")
        _require_slug(self.split, "split")
        _require_slug(self.setup_id, "setup_id")
        if not isinstance(self.example_idx, int) or isinstance(self.example_idx, bool) or self.example_idx < 0:
            raise ValueError(f"example_idx must be a non-negative integer, got {self.example_idx!r}")

    def to_json(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "split": self.split,
            "setup_id": self.setup_id,
            "example_idx": self.example_idx,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ExampleRef":
        if not isinstance(data, dict):
            raise ValueError(f"example ref must be an object, got {type(data).__name__}")
        return cls(
            dataset_id=data["dataset_id"],
            split=data["split"],
            setup_id=data["setup_id"],
            example_idx=data["example_idx"],
        )


@dataclass(frozen=True)
class Category:
    """One annotation category with its highlight color."""

    idx: int
    label: str
    color: str
    description: str = ""

    def __post_init__(self):
        if not isinstance(self.idx, int) or isinstance(self.idx, bool) or self.idx < 0:
            raise ValueError(f"category idx must be a non-negative integer, got {self.idx!r}")
        if not isinstance(self.color, str) or COLOR_RE.fullmatch(self.color) is None:
            raise ValueError(f"category color must be #RRGGBB, got {self.color!r}")

    def to_json(self) -> dict:
        return {
            "idx": self.idx,
            "label": self.label,
            "color": self.color,
            "description": self.description,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Category":
        return cls(
            idx=data["idx"],
            label=data["label"],
            color=data["color"],
            description=data.get("description", ""),
        )


def validate_categories(categories: Iterable[Category]) -> tuple[Category, ...]:
    """Check that category idx values are exactly 0..K-1 with no gaps."""
    cats = tuple(categories)
    if sorted(c.idx for c in cats) != list(range(len(cats))):
        raise ValueError("category idx values must be 0..K-1 with no gaps")
    return cats


@dataclass(frozen=True)
class SpanAnnotation:
    """A categorized code-point range over one output text.

    ``text`` stores the covered snippet redundantly so records stay
    interpretable if the output file is edited later; validate_record flags
    the drift as TEXT_MISMATCH.
    """

    start: int
    length: int
    category_idx: int
    text: str
    note: str | None = None

    def __post_init__(self):
        for name in ("start", "length", "category_idx"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValueError(f"span {name} must be an integer, got {v!r}")
        if not isinstance(self.text, str):
            raise ValueError("span text must be a string")
        if self.note is not None and not isinstance(self.note, str):
            raise ValueError("span note must be a string or null")

    @property
    def end(self) -> int:
        return self.start + self.length

    def sort_key(self) -> tuple[int, int]:
        return (self.start, self.length)

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "length": self.length,
            "category_idx": self.category_idx,
            "text": self.text,
            "note": self.note,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SpanAnnotation":
        if not isinstance(data, dict):
            raise ValueError(f"span must be an object, got {type(data).__name__}")
        return cls(
            start=data["start"],
            length=data["length"],
            category_idx=data["category_idx"],
            text=data["text"],
            note=data.get("note"),
        )


@dataclass(frozen=True)
class AnnotationRecord:
    """Persisted result: one annotator x one example -> spans plus provenance.

    Spans are kept sorted by (start, length); overlapping spans are allowed
    (LLM annotators may return overlapping claims) and an empty span list is
    a valid "no errors found" result.
    """

    campaign_id: str
    example: ExampleRef
    annotator_id: str
    annotator_kind: str
    spans: tuple[SpanAnnotation, ...]
    started_at: datetime
    finished_at: datetime
    flags: tuple[str, ...] = ()
    extra: dict | None = None

    def __post_init__(self):
        _require_slug(self.campaign_id, "campaign_id")
        if self.annotator_kind not in (HUMAN, LLM):
            raise ValueError(f"annotator_kind must be 'human' or 'llm', got {self.annotator_kind!r}")
        if self.finished_at < self.started_at:
            raise ValueError("finished_at must be >= started_at")
        object.__setattr__(self, "spans", tuple(sorted(self.spans, key=SpanAnnotation.sort_key)))
        object.__setattr__(self, "flags", tuple(self.flags))

    def to_json(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "example": self.example.to_json(),
            "annotator_id": self.annotator_id,
            "annotator_kind": self.annotator_kind,
            "spans": [s.to_json() for s in self.spans],
            "flags": list(self.flags),
            "started_at": format_timestamp(self.started_at),
            "finished_at": format_timestamp(self.finished_at),
            "extra": self.extra,
        }

    @classmethod
    def from_json(cls, data: dict) -> "AnnotationRecord":
        if not isinstance(data, dict):
            raise ValueError(f"record must be an object, got {type(data).__name__}")
        extra = data.get("extra")
        if extra is not None and not isinstance(extra, dict):
            raise ValueError("record extra must be an object or null")
        return cls(
            campaign_id=data["campaign_id"],
            example=ExampleRef.from_json(data["example"]),
            annotator_id=data["annotator_id"],
            annotator_kind=data["annotator_kind"],
            spans=tuple(SpanAnnotation.from_json(s) for s in data["spans"]),
            flags=tuple(data.get("flags", ())),
            started_at=parse_timestamp(data["started_at"]),
            finished_at=parse_timestamp(data["finished_at"]),
            extra=extra,
        )


@dataclass(frozen=True)
class Violation:
    """One failed validation check for one span of a record."""

    span_index: int
    code: str
    detail: str

    def to_json(self) -> dict:
        return {"span_index": self.span_index, "code": self.code, "detail": self.detail}


def validate_record(
    record: AnnotationRecord,
    output_text: str,
    categories: Iterable[Category],
) -> list[Violation]:
    """Check every span against the text it claims to annotate.

    Returns one violation per failing span, first failing check wins:
    bounds, then stored-text equality, then category validity.  An empty
    list means the record is safe to persist.  Pure function: never raises
    for bad span values.
    """
    valid_idx = {c.idx for c in categories}
    n = len(output_text)
    violations: list[Violation] = []
    for i, span in enumerate(record.spans):
        if span.start < 0 or span.length < 1 or span.start + span.length > n:
            violations.append(Violation(
                i, OUT_OF_BOUNDS,
                f"span [{span.start}, {span.start + span.length}) outside text of {n} code points",
            ))
        elif output_text[span.start:span.start + span.length] != span.text:
            violations.append(Violation(
                i, TEXT_MISMATCH,
                f"stored text {span.text!r} != covered text {output_text[span.start:span.start + span.length]!r}",
            ))
        elif span.category_idx not in valid_idx:
            violations.append(Violation(
                i, BAD_CATEGORY,
                f"category_idx {span.category_idx} not defined for this campaign",
            ))
    return violations
