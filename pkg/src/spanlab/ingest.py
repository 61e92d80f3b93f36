"""Dataset and model-output loading, plus render trees for display.

On-disk layout under a data root:

    datasets/{dataset_id}/meta.json     {"loader_kind": "jsonl|csv|text",
                                         "description": "...", "splits": [...]}
    datasets/{dataset_id}/{split}.jsonl | {split}.csv | {split}.txt
    outputs/{dataset_id}/{split}/{setup_id}.jsonl   lines {"idx":int,"out":str}

All files are UTF-8, one example per line (text/jsonl) or header+rows (csv).
Loaders only count and validate at load time; examples are re-read lazily by
index, so loaded datasets hold no example data in memory and concurrent
reads are trivially safe.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import SpanlabError
from .model import is_slug

LOADER_KINDS = ("jsonl", "csv", "text")


class IngestError(SpanlabError):
    pass


@dataclass(frozen=True)
class DatasetRecord:
    dataset_id: str
    loader_kind: str
    splits: dict[str, int]
    description: str = ""

    def to_json(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "loader_kind": self.loader_kind,
            "splits": dict(self.splits),
            "description": self.description,
        }


@dataclass(frozen=True)
class OutputSet:
    dataset_id: str
    split: str
    setup_id: str
    outputs: tuple[str, ...]


# --- render tree -----------------------------------------------------------
#
# A RenderTree is a loader-produced description of how to display one input
# example.  Nodes form a small tagged union; drawing them is the UI's job.


@dataclass(frozen=True)
class TextNode:
    content: str


@dataclass(frozen=True)
class KvNode:
    pairs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class TableNode:
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.header):
                raise ValueError("table rows must match header arity")


@dataclass(frozen=True)
class ListNode:
    items: tuple["RenderNode", ...]


@dataclass(frozen=True)
class SeriesNode:
    name: str
    x: tuple[str, ...]
    y: tuple[float, ...]
    unit: str = ""

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ValueError("series x and y must have equal length")


RenderNode = TextNode | KvNode | TableNode | ListNode | SeriesNode


@dataclass(frozen=True)
class RenderTree:
    root: RenderNode


def node_to_json(node: RenderNode) -> dict:
    if isinstance(node, TextNode):
        return {"kind": "text", "content": node.content}
    if isinstance(node, KvNode):
        return {"kind": "kv", "pairs": [[k, v] for k, v in node.pairs]}
    if isinstance(node, TableNode):
        return {"kind": "table", "header": list(node.header), "rows": [list(r) for r in node.rows]}
    if isinstance(node, ListNode):
        return {"kind": "list", "items": [node_to_json(i) for i in node.items]}
    if isinstance(node, SeriesNode):
        return {"kind": "series", "name": node.name, "x": list(node.x), "y": list(node.y), "unit": node.unit}
    raise TypeError(f"not a render node: {node!r}")


def node_from_json(data: dict) -> RenderNode:
    kind = data["kind"]
    if kind == "text":
        return TextNode(data["content"])
    if kind == "kv":
        return KvNode(tuple((k, v) for k, v in data["pairs"]))
    if kind == "table":
        return TableNode(tuple(data["header"]), tuple(tuple(r) for r in data["rows"]))
    if kind == "list":
        return ListNode(tuple(node_from_json(i) for i in data["items"]))
    if kind == "series":
        return SeriesNode(data["name"], tuple(data["x"]), tuple(data["y"]), data.get("unit", ""))
    raise ValueError(f"unknown render node kind {kind!r}")


def flatten_render_tree(tree: RenderTree) -> str:
    """Flatten a render tree to plain text, one leaf per line.

    Every scalar of the source value survives into the flattened text; this
    is what gets substituted into LLM prompts as the input description.
    """
    lines: list[str] = []

    def walk(node: RenderNode) -> None:
        if isinstance(node, TextNode):
            lines.append(node.content)
        elif isinstance(node, KvNode):
            lines.extend(f"{k}: {v}" for k, v in node.pairs)
        elif isinstance(node, TableNode):
            lines.append(" | ".join(node.header))
            lines.extend(" | ".join(row) for row in node.rows)
        elif isinstance(node, ListNode):
            for item in node.items:
                walk(item)
        elif isinstance(node, SeriesNode):
            label = f"{node.name} ({node.unit})" if node.unit else node.name
            lines.append(label)
            lines.extend(f"{x} = {_scalar_str(y)}" for x, y in zip(node.x, node.y))

    walk(tree.root)
    return "\n".join(lines)


def _is_scalar(value: Any) -> bool:
    return value is None or isinstance(value, (str, int, float, bool))


def _scalar_str(value: Any) -> str:
    """Stable display form for a JSON scalar (JSON spelling for non-strings)."""
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        return value
    if isinstance(value, float):
        return json.dumps(value) if math.isfinite(value) else str(value)
    return str(value)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _try_series(value: dict) -> RenderNode | None:
    """Map {"series": {name: [numbers]}, "x": [...], "unit": "..."} shapes.

    Applies only when the object carries nothing beyond series/x/unit and the
    shapes line up exactly; anything else falls through to the generic rules
    so no data is dropped.
    """
    if "series" not in value or set(value) - {"series", "x", "unit"}:
        return None
    series = value["series"]
    if not isinstance(series, dict) or not series:
        return None
    for ys in series.values():
        if not isinstance(ys, list) or not all(_is_number(y) for y in ys):
            return None
    unit = value.get("unit", "")
    if not isinstance(unit, str):
        return None
    x = value.get("x")
    if x is not None:
        if not isinstance(x, list) or not all(_is_scalar(v) for v in x):
            return None
        if any(len(ys) != len(x) for ys in series.values()):
            return None
    nodes = []
    for name, ys in series.items():
        xs = tuple(_scalar_str(v) for v in x) if x is not None else tuple(str(i) for i in range(len(ys)))
        nodes.append(SeriesNode(name=str(name), x=xs, y=tuple(ys), unit=unit))
    return nodes[0] if len(nodes) == 1 else ListNode(tuple(nodes))


def _try_table(value: list) -> TableNode | None:
    if not value or not all(isinstance(e, dict) for e in value):
        return None
    header = tuple(value[0].keys())
    for e in value:
        if set(e.keys()) != set(header) or not all(_is_scalar(v) for v in e.values()):
            return None
    rows = tuple(tuple(_scalar_str(e[k]) for k in header) for e in value)
    return TableNode(header=tuple(str(k) for k in header), rows=rows)


def _render_value(value: Any) -> RenderNode:
    if _is_scalar(value):
        return TextNode(_scalar_str(value))
    if isinstance(value, dict):
        series = _try_series(value)
        if series is not None:
            return series
        if all(_is_scalar(v) for v in value.values()):
            return KvNode(tuple((str(k), _scalar_str(v)) for k, v in value.items()))
        # mixed object: consecutive scalar entries collapse into kv nodes,
        # nested entries become [key, rendered-value] list pairs
        items: list[RenderNode] = []
        pending: list[tuple[str, str]] = []
        for k, v in value.items():
            if _is_scalar(v):
                pending.append((str(k), _scalar_str(v)))
            else:
                if pending:
                    items.append(KvNode(tuple(pending)))
                    pending = []
                items.append(ListNode((TextNode(str(k)), _render_value(v))))
        if pending:
            items.append(KvNode(tuple(pending)))
        return ListNode(tuple(items))
    if isinstance(value, list):
        table = _try_table(value)
        if table is not None:
            return table
        return ListNode(tuple(_render_value(v) for v in value))
    return TextNode(str(value))


def render_example(example_value: Any) -> RenderTree:
    """Deterministic, total mapping from a loaded example to its render tree."""
    return RenderTree(root=_render_value(example_value))


# --- loading ---------------------------------------------------------------


def _dataset_dir(root_dir: Path, dataset_id: str) -> Path:
    return Path(root_dir) / "datasets" / dataset_id


def _split_path(root_dir: Path, dataset_id: str, loader_kind: str, split: str) -> Path:
    ext = {"jsonl": "jsonl", "csv": "csv", "text": "txt"}[loader_kind]
    return _dataset_dir(root_dir, dataset_id) / f"{split}.{ext}"


def _read_meta(root_dir: Path, dataset_id: str) -> dict:
    meta_path = _dataset_dir(root_dir, dataset_id) / "meta.json"
    if not meta_path.is_file():
        raise IngestError("MISSING_META", f"no meta.json for dataset {dataset_id!r}", path=str(meta_path))
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise IngestError("CORRUPT_META", f"meta.json of {dataset_id!r} is not valid JSON: {exc}") from exc
    if not isinstance(meta, dict) or not isinstance(meta.get("splits"), list) or not meta["splits"]:
        raise IngestError("CORRUPT_META", f"meta.json of {dataset_id!r} must declare a non-empty splits list")
    if meta.get("loader_kind") not in LOADER_KINDS:
        raise IngestError(
            "UNKNOWN_LOADER",
            f"loader_kind {meta.get('loader_kind')!r} is not one of {', '.join(LOADER_KINDS)}",
        )
    return meta


def _split_lines(data: bytes) -> list[bytes]:
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return lines


def _count_split(path: Path, loader_kind: str, dataset_id: str, split: str) -> int:
    if not path.is_file():
        raise IngestError("EMPTY_SPLIT", f"split {split!r} of {dataset_id!r} has no data file {path.name}")
    if loader_kind == "text":
        count = len(_split_lines(path.read_bytes()))
    elif loader_kind == "jsonl":
        lines = _split_lines(path.read_bytes())
        for i, line in enumerate(lines):
            try:
                json.loads(line.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise IngestError(
                    "MALFORMED_ROW",
                    f"{path.name} line {i + 1} is not valid JSON: {exc}",
                    line=i + 1,
                ) from exc
        count = len(lines)
    else:  # csv
        count = len(_read_csv_rows(path))
    if count == 0:
        raise IngestError("EMPTY_SPLIT", f"split {split!r} of {dataset_id!r} has no examples")
    return count


def _read_csv_rows(path: Path) -> list[dict[str, str]]:
    """Parse a csv split into per-row dicts, checking arity against the header.

    Cells stay strings: rendering is presentation, not parsing.
    """
    reader = csv.reader(io.StringIO(path.read_text(encoding="utf-8"), newline=""))
    try:
        header = next(reader)
    except StopIteration:
        return []
    rows = []
    for row in reader:
        if len(row) != len(header):
            raise IngestError(
                "MALFORMED_ROW",
                f"{path.name} line {reader.line_num}: expected {len(header)} cells, got {len(row)}",
                line=reader.line_num,
            )
        rows.append(dict(zip(header, row)))
    return rows


def load_dataset(root_dir: Path, dataset_id: str) -> DatasetRecord:
    """Read meta.json and count every split, without retaining examples."""
    meta = _read_meta(root_dir, dataset_id)
    splits = {}
    for split in meta["splits"]:
        if not is_slug(split):
            raise IngestError("CORRUPT_META", f"split name {split!r} is not a valid slug")
        path = _split_path(root_dir, dataset_id, meta["loader_kind"], split)
        splits[split] = _count_split(path, meta["loader_kind"], dataset_id, split)
    return DatasetRecord(
        dataset_id=dataset_id,
        loader_kind=meta["loader_kind"],
        splits=splits,
        description=meta.get("description", ""),
    )


def list_datasets(root_dir: Path) -> list[DatasetRecord]:
    base = Path(root_dir) / "datasets"
    if not base.is_dir():
        return []
    records = []
    for entry in sorted(base.iterdir()):
        if entry.is_dir() and is_slug(entry.name):
            records.append(load_dataset(root_dir, entry.name))
    return records


def get_example(root_dir: Path, dataset_id: str, split: str, example_idx: int) -> Any:
    """Fetch one example by index, re-reading only what that index needs.

    jsonl -> parsed JSON value; csv -> header->cell dict; text -> string.
    Only the requested line is decoded, so damage to other lines of a text
    split cannot affect this read.
    """
    meta = _read_meta(root_dir, dataset_id)
    if split not in meta["splits"]:
        raise IngestError("INDEX_OUT_OF_RANGE", f"dataset {dataset_id!r} has no split {split!r}")
    path = _split_path(root_dir, dataset_id, meta["loader_kind"], split)
    if meta["loader_kind"] == "csv":
        rows = _read_csv_rows(path)
        if not 0 <= example_idx < len(rows):
            raise IngestError("INDEX_OUT_OF_RANGE", f"{split}[{example_idx}] out of range, count {len(rows)}")
        return rows[example_idx]
    lines = _split_lines(path.read_bytes()) if path.is_file() else []
    if not 0 <= example_idx < len(lines):
        raise IngestError("INDEX_OUT_OF_RANGE", f"{split}[{example_idx}] out of range, count {len(lines)}")
    text = lines[example_idx].decode("utf-8")
    if meta["loader_kind"] == "text":
        return text
    return json.loads(text)


def load_outputs(root_dir: Path, dataset_id: str, split: str, setup_id: str) -> OutputSet:
    """Load one setup's outputs, ordered by idx, verified gap- and dup-free."""
    record = load_dataset(root_dir, dataset_id)
    if split not in record.splits:
        raise IngestError("MISSING_FILE", f"dataset {dataset_id!r} has no split {split!r}")
    path = Path(root_dir) / "outputs" / dataset_id / split / f"{setup_id}.jsonl"
    if not path.is_file():
        raise IngestError("MISSING_FILE", f"no outputs file {path}", path=str(path))
    by_idx: dict[int, str] = {}
    for i, line in enumerate(_split_lines(path.read_bytes())):
        try:
            row = json.loads(line.decode("utf-8"))
            idx, out = row["idx"], row["out"]
        except Exception as exc:
            raise IngestError("MALFORMED_ROW", f"{path.name} line {i + 1}: {exc}", line=i + 1) from exc
        if not isinstance(idx, int) or isinstance(idx, bool) or not isinstance(out, str):
            raise IngestError("MALFORMED_ROW", f"{path.name} line {i + 1}: idx must be int, out must be string", line=i + 1)
        if idx in by_idx:
            raise IngestError("DUPLICATE_IDX", f"{path.name}: idx {idx} appears more than once")
        by_idx[idx] = out
    expected = record.splits[split]
    missing = [i for i in range(max(by_idx, default=-1) + 1) if i not in by_idx]
    if missing:
        raise IngestError("GAP_IN_IDX", f"{path.name}: missing idx {missing[0]}")
    if len(by_idx) != expected:
        raise IngestError(
            "COUNT_MISMATCH",
            f"{path.name} has {len(by_idx)} outputs but split {split!r} has {expected} examples",
        )
    return OutputSet(
        dataset_id=dataset_id,
        split=split,
        setup_id=setup_id,
        outputs=tuple(by_idx[i] for i in range(expected)),
    )


def list_setups(root_dir: Path, dataset_id: str, split: str) -> list[str]:
    base = Path(root_dir) / "outputs" / dataset_id / split
    if not base.is_dir():
        return []
    return sorted(p.stem for p in base.glob("*.jsonl") if is_slug(p.stem))
