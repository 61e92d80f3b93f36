"""Campaign types and the pure pieces of the lifecycle.

Everything here is deterministic and side-effect free: batch construction,
assignment selection, idle reclamation, and completion codes.  Locking and
persistence live in the engine and store.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime

from .errors import SpanlabError
from .llm import LlmConfig
from .model import (
    HUMAN,
    LLM,
    SLUG_RE,
    Category,
    ExampleRef,
    format_timestamp,
    parse_timestamp,
    validate_categories,
)
from .rng import SplitMix64, fisher_yates

FREE = "free"
ASSIGNED = "assigned"
COMPLETED = "completed"

_STATUSES = (FREE, ASSIGNED, COMPLETED)
_MAX_SEED = 2**64


class CampaignError(SpanlabError):
    pass


@dataclass(frozen=True)
class SourceRef:
    """One (dataset, split, output setup) triple contributing examples."""

    dataset_id: str
    split: str
    setup_id: str

    def __post_init__(self):
        for name in ("dataset_id", "split", "setup_id"):
            value = getattr(self, name)
            if not isinstance(value, str) or not SLUG_RE.fullmatch(value):
                raise ValueError(f"{name} must be a slug, got {value!r}")

    def to_json(self) -> dict:
        return {"dataset_id": self.dataset_id, "split": self.split, "setup_id": self.setup_id}

    @classmethod
    def from_json(cls, data: dict) -> "SourceRef":
        return cls(dataset_id=data["dataset_id"], split=data["split"], setup_id=data["setup_id"])


@dataclass(frozen=True)
class CampaignConfig:
    campaign_id: str
    kind: str
    sources: tuple[SourceRef, ...]
    categories: tuple[Category, ...]
    examples_per_batch: int
    annotators_per_example: int
    idle_timeout_s: int
    shuffle_seed: int
    instructions: str = ""
    secret: str = ""
    llm: LlmConfig | None = None

    def __post_init__(self):
        if not isinstance(self.campaign_id, str) or not SLUG_RE.fullmatch(self.campaign_id):
            raise ValueError(f"campaign_id must be a slug, got {self.campaign_id!r}")
        if self.kind not in (HUMAN, LLM):
            raise ValueError(f"kind must be {HUMAN!r} or {LLM!r}, got {self.kind!r}")
        sources = tuple(self.sources)
        object.__setattr__(self, "sources", sources)
        if not sources:
            raise ValueError("sources must be non-empty")
        if len(set(sources)) != len(sources):
            raise ValueError("sources must be distinct")
        categories = tuple(self.categories)
        object.__setattr__(self, "categories", categories)
        validate_categories(categories)
        if self.examples_per_batch < 1:
            raise ValueError("examples_per_batch must be >= 1")
        if self.annotators_per_example < 1:
            raise ValueError("annotators_per_example must be >= 1")
        if self.idle_timeout_s < 1:
            raise ValueError("idle_timeout_s must be >= 1")
        if not 0 <= self.shuffle_seed < _MAX_SEED:
            raise ValueError("shuffle_seed must be an unsigned 64-bit integer")
        if self.kind == LLM and self.llm is None:
            raise ValueError("an llm campaign requires an llm configuration")
        if self.kind == HUMAN and self.llm is not None:
            raise ValueError("a human campaign cannot carry an llm configuration")

    def to_json(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "kind": self.kind,
            "sources": [s.to_json() for s in self.sources],
            "categories": [c.to_json() for c in self.categories],
            "examples_per_batch": self.examples_per_batch,
            "annotators_per_example": self.annotators_per_example,
            "idle_timeout_s": self.idle_timeout_s,
            "shuffle_seed": self.shuffle_seed,
            "instructions": self.instructions,
            "secret": self.secret,
            "llm": self.llm.to_json() if self.llm is not None else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CampaignConfig":
        llm_raw = data.get("llm")
        return cls(
            campaign_id=data["campaign_id"],
            kind=data["kind"],
            sources=tuple(SourceRef.from_json(s) for s in data["sources"]),
            categories=tuple(Category.from_json(c) for c in data["categories"]),
            examples_per_batch=data["examples_per_batch"],
            annotators_per_example=data["annotators_per_example"],
            idle_timeout_s=data["idle_timeout_s"],
            shuffle_seed=data["shuffle_seed"],
            instructions=data.get("instructions", ""),
            secret=data.get("secret", ""),
            llm=LlmConfig.from_json(llm_raw) if llm_raw is not None else None,
        )


@dataclass
class Batch:
    """One unit of assignable work; status moves free -> assigned -> completed."""

    batch_idx: int
    examples: tuple[ExampleRef, ...]
    status: str = FREE
    annotator_id: str | None = None
    assigned_at: datetime | None = None

    def __post_init__(self):
        self.examples = tuple(self.examples)
        if self.batch_idx < 0:
            raise ValueError("batch_idx must be non-negative")
        if not self.examples:
            raise ValueError("a batch must hold at least one example")
        if self.status not in _STATUSES:
            raise ValueError(f"unknown batch status {self.status!r}")

    def to_json(self) -> dict:
        return {
            "batch_idx": self.batch_idx,
            "examples": [e.to_json() for e in self.examples],
            "status": self.status,
            "annotator_id": self.annotator_id,
            "assigned_at": format_timestamp(self.assigned_at) if self.assigned_at else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Batch":
        raw_at = data.get("assigned_at")
        return cls(
            batch_idx=data["batch_idx"],
            examples=tuple(ExampleRef.from_json(e) for e in data["examples"]),
            status=data["status"],
            annotator_id=data.get("annotator_id"),
            assigned_at=parse_timestamp(raw_at) if raw_at else None,
        )


@dataclass
class CampaignState:
    config: CampaignConfig
    batches: list[Batch]
    created_at: datetime
    annotator_history: dict[str, set[ExampleRef]] = field(default_factory=dict)

    def rebuild_history(self) -> None:
        """Recompute who has touched what from batch assignments."""
        history: dict[str, set[ExampleRef]] = {}
        for batch in self.batches:
            if batch.annotator_id and batch.status in (ASSIGNED, COMPLETED):
                history.setdefault(batch.annotator_id, set()).update(batch.examples)
        self.annotator_history = history


def build_batches(
    examples: list[ExampleRef],
    examples_per_batch: int,
    annotators_per_example: int,
    seed: int,
) -> list[Batch]:
    """Deterministically expand an example list into batches.

    Each replica r in 0..A-1 is an independent shuffle of the full example
    list, seeded with seed + r, chunked into consecutive batches of size E
    (the last chunk of a replica may be smaller).  batch_idx runs globally
    across replicas, so replica boundaries stay aligned on E-multiples.
    """
    if not examples:
        raise CampaignError("EMPTY_EXAMPLES", "campaign sources yield no examples")
    if len(set(examples)) != len(examples):
        raise CampaignError("DUPLICATE_EXAMPLE", "example list contains duplicates")
    batches: list[Batch] = []
    for replica in range(annotators_per_example):
        order = list(examples)
        fisher_yates(order, SplitMix64(seed + replica))
        for lo in range(0, len(order), examples_per_batch):
            chunk = tuple(order[lo:lo + examples_per_batch])
            batches.append(Batch(batch_idx=len(batches), examples=chunk))
    return batches


def select_next_batch(state: CampaignState, annotator_id: str) -> Batch | None:
    """Lowest-index free batch sharing no example with the annotator's history."""
    seen = state.annotator_history.get(annotator_id, set())
    for batch in state.batches:
        if batch.status != FREE:
            continue
        if seen and any(ref in seen for ref in batch.examples):
            continue
        return batch
    return None


def assign_batch(state: CampaignState, batch: Batch, annotator_id: str, now: datetime) -> None:
    batch.status = ASSIGNED
    batch.annotator_id = annotator_id
    batch.assigned_at = now
    state.annotator_history.setdefault(annotator_id, set()).update(batch.examples)


def release_batch(state: CampaignState, batch: Batch) -> None:
    """Return an assigned batch to the pool, forgetting the assignment."""
    if batch.annotator_id is not None:
        seen = state.annotator_history.get(batch.annotator_id)
        if seen is not None:
            seen.difference_update(_still_held(state, batch))
    batch.status = FREE
    batch.annotator_id = None
    batch.assigned_at = None


def _still_held(state: CampaignState, releasing: Batch) -> set[ExampleRef]:
    """Examples of the releasing batch not also held by another of its annotator's batches."""
    annotator = releasing.annotator_id
    kept: set[ExampleRef] = set(releasing.examples)
    for other in state.batches:
        if other is releasing or other.annotator_id != annotator:
            continue
        if other.status in (ASSIGNED, COMPLETED):
            kept.difference_update(other.examples)
    return kept


def reclaim_idle(state: CampaignState, now: datetime) -> int:
    """Free every assigned batch idle strictly longer than the timeout."""
    timeout = state.config.idle_timeout_s
    reclaimed = 0
    for batch in state.batches:
        if batch.status != ASSIGNED or batch.assigned_at is None:
            continue
        if (now - batch.assigned_at).total_seconds() > timeout:
            release_batch(state, batch)
            reclaimed += 1
    return reclaimed


def completion_code(campaign_id: str, batch_idx: int, annotator_id: str, secret: str) -> str:
    """Proof-of-work voucher handed out on submission; verifiable offline."""
    digest = hashlib.sha256(f"{campaign_id}:{batch_idx}:{annotator_id}:{secret}".encode("utf-8")).hexdigest()
    return f"{campaign_id}-{batch_idx}-{digest[:8]}"


def count_statuses(state: CampaignState) -> dict[str, int]:
    counts = {FREE: 0, ASSIGNED: 0, COMPLETED: 0}
    for batch in state.batches:
        counts[batch.status] += 1
    return counts
