"""Desk-scale demo bundle: weather data, model forecasts, campaign configs.

Everything here is small enough to eyeball and chosen so the whole workflow
runs offline: the forecasts contain planted factual errors, one deliberately
repeated phrase (so duplicate-snippet alignment is exercised by the demo
itself), and the claim lists used by the mock model server quote exact
substrings of the forecasts.
"""

from __future__ import annotations

import json
from pathlib import Path

from .model import Category

SAMPLE_DATASET_ID = "weather"
SAMPLE_SPLIT = "dev"
SAMPLE_SETUP_ID = "forecast-bot"
SAMPLE_SECRET = "demo-secret"

SAMPLE_CATEGORIES = (
    Category(0, "incorrect fact", "#e45756", "contradicted by the input data"),
    Category(1, "fact not checkable", "#f2a93b", "cannot be verified against the input data"),
    Category(2, "misleading fact", "#7b61c4", "true but creates a false impression"),
)

SAMPLE_TIMES = ("06:00", "09:00", "12:00", "15:00", "18:00")

SAMPLE_TEMPERATURES = (
    (12, 14, 17, 16, 13),
    (8, 9, 11, 10, 7),
    (18, 21, 24, 23, 20),
    (2, 3, 5, 4, 1),
    (14, 15, 15, 15, 14),
)

SAMPLE_FORECASTS = (
    "A mild day with sunny spells. Temperatures climb to 19 °C by noon, and sunny spells continue into the evening.",
    "Chilly throughout, topping out near 11 °C around midday. Expect a freezing night ahead.",
    "A warm afternoon with highs of 24 °C. Light winds from the west all day.",
    "Cold start at 0 °C, rising to just 5 °C by midday. Roads may be icy after sunset.",
    "Steady temperatures all day, holding around 15 °C. A perfect day for a picnic.",
)

# what the mock model "finds": exact substrings of the forecast at the same
# index, in the schema real models are prompted to produce
SAMPLE_CLAIMS = (
    [
        {"text": "sunny spells", "type": 1, "reason": "cloud cover is not part of the input data"},
        {"text": "sunny spells", "type": 1, "reason": "repeated claim, still not in the data"},
        {"text": "19 °C", "type": 0, "reason": "the data peaks at 17 °C at 12:00"},
    ],
    [
        {"text": "freezing night", "type": 2, "reason": "the 18:00 value is 7 °C, above freezing"},
    ],
    [
        {"text": "Light winds from the west", "type": 1, "reason": "wind is not part of the input data"},
    ],
    [
        {"text": "0 °C", "type": 0, "reason": "the 06:00 value is 2 °C"},
        {"text": "Roads may be icy", "type": 1, "reason": "road conditions are not in the data"},
    ],
    [
        {"text": "A perfect day for a picnic", "type": 2, "reason": "an opinion presented as a data-backed fact"},
    ],
)

SAMPLE_INSTRUCTIONS = (
    "Read the weather data, then the generated forecast. Highlight every span "
    "of the forecast that is wrong, unverifiable, or misleading, and pick the "
    "matching category. Confirm explicitly when a forecast has no errors."
)

SAMPLE_PROMPT_TEMPLATE = (
    "Input data:\n{input}\n\n"
    "Generated text:\n{output}\n\n"
    "List every error in the generated text. Respond with JSON of the form "
    '{"annotations": [{"text": "...", "type": 0, "reason": "..."}]} where '
    '"text" is an exact substring of the generated text and "type" is '
    "0 (incorrect fact), 1 (fact not checkable) or 2 (misleading fact). "
    'Respond {"annotations": []} if the text is fully correct.'
)

SAMPLE_SYSTEM_MESSAGE = (
    "You are a careful annotator of errors in data-to-text generation. "
    "You respond with valid JSON and nothing else."
)


def example_payload(example_idx: int) -> dict:
    return {
        "series": {"temperature": list(SAMPLE_TEMPERATURES[example_idx])},
        "x": list(SAMPLE_TIMES),
        "unit": "°C",
    }


def human_campaign_config() -> dict:
    return {
        "campaign_id": "weather-human",
        "kind": "human",
        "sources": [{
            "dataset_id": SAMPLE_DATASET_ID,
            "split": SAMPLE_SPLIT,
            "setup_id": SAMPLE_SETUP_ID,
        }],
        "categories": [c.to_json() for c in SAMPLE_CATEGORIES],
        "examples_per_batch": 2,
        "annotators_per_example": 1,
        "idle_timeout_s": 600,
        "shuffle_seed": 13,
        "instructions": SAMPLE_INSTRUCTIONS,
        "secret": SAMPLE_SECRET,
        "llm": None,
    }


def llm_campaign_config(base_url: str, protocol: str = "open_inference", api_key_env: str | None = None) -> dict:
    return {
        "campaign_id": "weather-llm",
        "kind": "llm",
        "sources": [{
            "dataset_id": SAMPLE_DATASET_ID,
            "split": SAMPLE_SPLIT,
            "setup_id": SAMPLE_SETUP_ID,
        }],
        "categories": [c.to_json() for c in SAMPLE_CATEGORIES],
        "examples_per_batch": 1,
        "annotators_per_example": 1,
        "idle_timeout_s": 600,
        "shuffle_seed": 42,
        "instructions": "",
        "secret": SAMPLE_SECRET,
        "llm": {
            "protocol": protocol,
            "base_url": base_url,
            "model": "mock-judge",
            "system_message": SAMPLE_SYSTEM_MESSAGE,
            "prompt_template": SAMPLE_PROMPT_TEMPLATE,
            "temperature": 0.0,
            "seed": 1,
            "max_retries": 3,
            "api_key_env": api_key_env,
        },
    }


def write_sample_bundle(data_root: Path | str, llm_base_url: str = "http://127.0.0.1:11434") -> dict[str, Path]:
    """Materialize the demo under a data root; returns the paths written.

    Campaign configs land next to the data as plain JSON files ready for
    `campaign create --config`; nothing is registered automatically.
    """
    root = Path(data_root)
    dataset_dir = root / "datasets" / SAMPLE_DATASET_ID
    outputs_dir = root / "outputs" / SAMPLE_DATASET_ID / SAMPLE_SPLIT
    dataset_dir.mkdir(parents=True, exist_ok=True)
    outputs_dir.mkdir(parents=True, exist_ok=True)

    meta_path = dataset_dir / "meta.json"
    meta_path.write_text(json.dumps({
        "loader_kind": "jsonl",
        "description": "Hourly temperatures for five demo days, with generated forecasts.",
        "splits": [SAMPLE_SPLIT],
    }, indent=2) + "\n", encoding="utf-8")

    split_path = dataset_dir / f"{SAMPLE_SPLIT}.jsonl"
    split_path.write_text(
        "".join(json.dumps(example_payload(i), ensure_ascii=False) + "\n" for i in range(len(SAMPLE_TEMPERATURES))),
        encoding="utf-8",
    )

    outputs_path = outputs_dir / f"{SAMPLE_SETUP_ID}.jsonl"
    outputs_path.write_text(
        "".join(
            json.dumps({"idx": i, "out": text}, ensure_ascii=False) + "\n"
            for i, text in enumerate(SAMPLE_FORECASTS)
        ),
        encoding="utf-8",
    )

    human_path = root / "campaign_human.json"
    human_path.write_text(json.dumps(human_campaign_config(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    llm_path = root / "campaign_llm.json"
    llm_path.write_text(
        json.dumps(llm_campaign_config(llm_base_url), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )

    return {
        "meta": meta_path,
        "split": split_path,
        "outputs": outputs_path,
        "human_campaign": human_path,
        "llm_campaign": llm_path,
    }
