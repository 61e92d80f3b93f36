"""LLM annotation: prompt building, response parsing, snippet alignment, jobs.

A model is prompted per example and asked for JSON of the shape

    {"annotations": [{"text": "...", "type": 0, "reason": "..."}]}

where ``text`` is a verbatim snippet of the output text and ``type`` is a
category index.  Parsed claims are then aligned to code-point offsets; the
model never sees or produces offsets itself.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable, Protocol

import httpx

from .errors import SpanlabError
from .model import (
    LLM,
    AnnotationRecord,
    Category,
    ExampleRef,
    SpanAnnotation,
    utc_now,
)

if TYPE_CHECKING:
    from .engine import CampaignEngine

OPEN_INFERENCE = "open_inference"
HOSTED_CHAT = "hosted_chat"

JOB_RUNNING = "running"
JOB_STOPPED = "stopped"
JOB_FINISHED = "finished"


class LlmParseError(SpanlabError):
    """Model response could not be turned into claims (UNPARSEABLE / WRONG_SHAPE)."""


class ApiCallError(SpanlabError):
    """Model API unreachable or failing after all retries (code API_ERROR)."""


class TransportError(Exception):
    """One failed HTTP exchange with the model API; retried by the caller."""

    def __init__(self, status: int | None, body: str):
        super().__init__(f"status={status}: {body[:200]}")
        self.status = status
        self.body = body


@dataclass(frozen=True)
class LlmConfig:
    protocol: str
    base_url: str
    model: str
    system_message: str
    prompt_template: str
    temperature: float = 0.0
    seed: int | None = None
    max_retries: int = 3
    api_key_env: str | None = None

    def __post_init__(self):
        if self.protocol not in (OPEN_INFERENCE, HOSTED_CHAT):
            raise ValueError(f"protocol must be {OPEN_INFERENCE!r} or {HOSTED_CHAT!r}, got {self.protocol!r}")
        for placeholder in ("{input}", "{output}"):
            if self.prompt_template.count(placeholder) != 1:
                raise ValueError(f"prompt_template must contain {placeholder} exactly once")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "base_url": self.base_url,
            "model": self.model,
            "system_message": self.system_message,
            "prompt_template": self.prompt_template,
            "temperature": self.temperature,
            "seed": self.seed,
            "max_retries": self.max_retries,
            "api_key_env": self.api_key_env,
        }

    @classmethod
    def from_json(cls, data: dict) -> "LlmConfig":
        return cls(
            protocol=data["protocol"],
            base_url=data["base_url"],
            model=data["model"],
            system_message=data["system_message"],
            prompt_template=data["prompt_template"],
            temperature=data.get("temperature", 0.0),
            seed=data.get("seed"),
            max_retries=data.get("max_retries", 3),
            api_key_env=data.get("api_key_env"),
        )


@dataclass(frozen=True)
class Claim:
    """One annotation as returned by the model, before offset alignment."""

    text: str
    category_idx: int
    reason: str | None = None


@dataclass(frozen=True)
class AlignmentResult:
    spans: tuple[SpanAnnotation, ...]
    unmatched: tuple[Claim, ...]


@dataclass(frozen=True)
class ParseResult:
    claims: tuple[Claim, ...]
    dropped: int


_PLACEHOLDER_RE = re.compile(r"\{(input|output)\}")


def build_prompt(cfg: LlmConfig, input_render_text: str, output_text: str) -> str:
    """Substitute the two placeholders in a single pass over the template.

    Values are never rescanned, so placeholder-looking text inside the input
    or output cannot trigger a second substitution; literal braces elsewhere
    in the template pass through untouched.
    """
    values = {"input": input_render_text, "output": output_text}
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], cfg.prompt_template)


_FENCE_RE = re.compile(r"\s*```[A-Za-z]*[ \t]*\n?(.*)\n?[ \t]*```\s*", re.DOTALL)


def parse_model_response(raw: str, num_categories: int) -> ParseResult:
    """Normalize an untrusted model response into claims.

    Accepts either {"annotations": [...]} or a bare top-level array, with an
    optional single surrounding Markdown code fence.  Elements missing a
    non-empty string ``text`` or an in-range integer ``type`` are dropped and
    counted rather than treated as fatal.
    """
    fenced = _FENCE_RE.fullmatch(raw)
    body = fenced.group(1) if fenced else raw
    try:
        value = json.loads(body)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise LlmParseError("UNPARSEABLE", f"response is not JSON: {exc}") from exc
    if isinstance(value, list):
        items = value
    elif isinstance(value, dict) and isinstance(value.get("annotations"), list):
        items = value["annotations"]
    else:
        raise LlmParseError("WRONG_SHAPE", "expected an annotations object or a top-level array")
    claims: list[Claim] = []
    dropped = 0
    for item in items:
        if not isinstance(item, dict):
            dropped += 1
            continue
        text = item.get("text")
        idx = item.get("type")
        if not isinstance(text, str) or text == "":
            dropped += 1
            continue
        if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < num_categories:
            dropped += 1
            continue
        reason = item.get("reason")
        claims.append(Claim(text=text, category_idx=idx, reason=reason if isinstance(reason, str) else None))
    return ParseResult(claims=tuple(claims), dropped=dropped)


def _fold_char(ch: str) -> str:
    low = ch.lower()
    return low if len(low) == 1 else ch


def _fold(text: str) -> str:
    # per-code-point simple folding keeps offsets 1:1 with the original
    return "".join(_fold_char(c) for c in text)


def align_claims(output_text: str, claims: Iterable[Claim]) -> AlignmentResult:
    """Locate each claimed snippet in the output text, in claim order.

    A cursor keeps repeated snippets moving forward through the document:
    search first from the cursor, then from the start, then case-insensitively
    from the start.  After a match at position i the cursor becomes i + 1
    (advance by one, not by match length, so overlapping claims stay legal).
    Claims that never match are reported, not guessed at.
    """
    spans: list[SpanAnnotation] = []
    unmatched: list[Claim] = []
    cursor = 0
    folded_text: str | None = None
    for claim in claims:
        needle = claim.text
        if not needle:
            unmatched.append(claim)
            continue
        pos = output_text.find(needle, cursor)
        if pos < 0:
            pos = output_text.find(needle)
        if pos < 0:
            if folded_text is None:
                folded_text = _fold(output_text)
            pos = folded_text.find(_fold(needle))
        if pos < 0:
            unmatched.append(claim)
            continue
        spans.append(SpanAnnotation(
            start=pos,
            length=len(needle),
            category_idx=claim.category_idx,
            text=output_text[pos:pos + len(needle)],
            note=claim.reason,
        ))
        cursor = pos + 1
    spans.sort(key=SpanAnnotation.sort_key)
    return AlignmentResult(spans=tuple(spans), unmatched=tuple(unmatched))


class ChatClient(Protocol):
    def chat(self, system_message: str, user_prompt: str) -> str:
        """Return the model's message content; raise TransportError on failure."""


class HttpChatClient:
    """Thin wrapper over the two supported model-API wire protocols."""

    def __init__(self, cfg: LlmConfig, timeout: float = 120.0):
        self.cfg = cfg
        self._http = httpx.Client(timeout=timeout)

    def chat(self, system_message: str, user_prompt: str) -> str:
        cfg = self.cfg
        messages = [
            {"role": "system", "content": system_message},
            {"role": "user", "content": user_prompt},
        ]
        base = cfg.base_url.rstrip("/")
        if cfg.protocol == OPEN_INFERENCE:
            url = f"{base}/api/chat"
            options: dict = {"temperature": cfg.temperature}
            if cfg.seed is not None:
                options["seed"] = cfg.seed
            body = {
                "model": cfg.model,
                "messages": messages,
                "format": "json",
                "stream": False,
                "options": options,
            }
            headers = {}
        else:
            url = f"{base}/v1/chat/completions"
            body = {
                "model": cfg.model,
                "messages": messages,
                "temperature": cfg.temperature,
                "response_format": {"type": "json_object"},
            }
            if cfg.seed is not None:
                body["seed"] = cfg.seed
            key = os.environ.get(cfg.api_key_env) if cfg.api_key_env else None
            if not key:
                raise TransportError(None, f"API key environment variable {cfg.api_key_env!r} is not set")
            headers = {"Authorization": f"Bearer {key}"}
        try:
            resp = self._http.post(url, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise TransportError(None, str(exc)) from exc
        if resp.status_code < 200 or resp.status_code >= 300:
            raise TransportError(resp.status_code, resp.text)
        try:
            data = resp.json()
            if cfg.protocol == OPEN_INFERENCE:
                content = data["message"]["content"]
            else:
                content = data["choices"][0]["message"]["content"]
        except Exception as exc:
            raise TransportError(resp.status_code, f"response missing message content: {resp.text[:200]}") from exc
        if not isinstance(content, str):
            raise TransportError(resp.status_code, "message content is not a string")
        return content

    def close(self) -> None:
        self._http.close()


def annotate_example(
    cfg: LlmConfig,
    categories: Iterable[Category],
    example_render_text: str,
    output_text: str,
    client: ChatClient,
    *,
    campaign_id: str,
    example: ExampleRef,
) -> AnnotationRecord:
    """Run one model call (with retries), parse, align, and build the record.

    Transport failures and unparseable/mis-shaped responses trigger a fresh
    call, up to ``cfg.max_retries`` calls in total; the last error is raised
    once the budget is exhausted.
    """
    categories = tuple(categories)
    prompt = build_prompt(cfg, example_render_text, output_text)
    started = utc_now()
    last_error: SpanlabError | None = None
    for _ in range(cfg.max_retries):
        try:
            raw = client.chat(cfg.system_message, prompt)
        except TransportError as exc:
            last_error = ApiCallError(
                "API_ERROR",
                f"model API call failed: {exc}",
                status=exc.status,
                body=exc.body,
            )
            continue
        try:
            parsed = parse_model_response(raw, len(categories))
        except LlmParseError as exc:
            last_error = exc
            continue
        aligned = align_claims(output_text, parsed.claims)
        return AnnotationRecord(
            campaign_id=campaign_id,
            example=example,
            annotator_id=cfg.model,
            annotator_kind=LLM,
            spans=aligned.spans,
            started_at=started,
            finished_at=utc_now(),
            extra={
                "raw_response": raw,
                "unmatched_count": len(aligned.unmatched),
                "dropped_count": parsed.dropped,
            },
        )
    assert last_error is not None
    raise last_error


@dataclass(frozen=True)
class JobStatus:
    state: str
    completed_count: int
    error_count: int

    def to_json(self) -> dict:
        return {
            "state": self.state,
            "completed_count": self.completed_count,
            "error_count": self.error_count,
        }


class LlmJob:
    """Sequential runner for one LLM campaign: one in-flight request, ever.

    Batches are processed in batch_idx order and each record is persisted as
    soon as it exists, so a killed job resumes cleanly: completed batches are
    skipped on the next run.  ``stop`` is honored between examples.
    """

    def __init__(
        self,
        engine: "CampaignEngine",
        client: ChatClient,
        render_text_for: Callable[[ExampleRef], str],
        output_text_for: Callable[[ExampleRef], str],
    ):
        config = engine.config
        if config.llm is None:
            raise ValueError(f"campaign {config.campaign_id!r} has no LLM configuration")
        self.cfg = config.llm
        self._engine = engine
        self._client = client
        self._render_text_for = render_text_for
        self._output_text_for = output_text_for
        self._stop = threading.Event()
        self._lock = threading.Lock()
        self._state = JOB_RUNNING
        self._completed = 0
        self._errors = 0
        self._thread: threading.Thread | None = None

    def start(self) -> "LlmJob":
        self._thread = threading.Thread(target=self.run, name=f"llm-job-{self._engine.campaign_id}", daemon=True)
        self._thread.start()
        return self

    def run(self) -> None:
        engine = self._engine
        for batch in list(engine.state.batches):
            if self._stop.is_set():
                self._set_state(JOB_STOPPED)
                return
            if not engine.claim_batch_for_llm(batch.batch_idx, self.cfg.model):
                continue
            try:
                records = [
                    annotate_example(
                        self.cfg,
                        engine.config.categories,
                        self._render_text_for(ref),
                        self._output_text_for(ref),
                        self._client,
                        campaign_id=engine.campaign_id,
                        example=ref,
                    )
                    for ref in batch.examples
                ]
                engine.complete_llm_batch(batch.batch_idx, records)
                with self._lock:
                    self._completed += 1
            except Exception:
                engine.release_batch(batch.batch_idx)
                with self._lock:
                    self._errors += 1
        self._set_state(JOB_FINISHED)

    def stop(self) -> None:
        self._stop.set()

    def join(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    def _set_state(self, state: str) -> None:
        with self._lock:
            self._state = state

    def status(self) -> JobStatus:
        with self._lock:
            return JobStatus(self._state, self._completed, self._errors)
