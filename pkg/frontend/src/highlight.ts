// Colored span highlights over an output text. The text is cut at every
// span edge; each resulting segment knows which spans cover it, so overlaps
// layer cleanly and boundaries inside an overlap stay visible.
//
// Offsets arriving here are always the service's code-point (start, length)
// pairs; display text is re-sliced from them, never recomputed locally.

import { codePoints } from "./offsets.js";
import type { Span } from "./types.js";

export interface Segment {
  start: number;
  length: number;
  text: string;
  /** indexes into the spans array, in input order; empty for plain text */
  covers: number[];
  /** a span edge falls here while another span continues across it */
  boundary: boolean;
}

export function segmentText(text: string, spans: readonly Span[]): Segment[] {
  const cps = codePoints(text);
  const cuts = new Set<number>([0, cps.length]);
  for (const s of spans) {
    cuts.add(clamp(s.start, cps.length));
    cuts.add(clamp(s.start + s.length, cps.length));
  }
  const edges = Array.from(cuts).sort((a, b) => a - b);

  const segments: Segment[] = [];
  for (let i = 0; i + 1 < edges.length; i += 1) {
    const start = edges[i]!;
    const end = edges[i + 1]!;
    const covers = spans
      .map((s, idx) => ({ s, idx }))
      .filter(({ s }) => s.start < end && s.start + s.length > start)
      .map(({ idx }) => idx);
    const prev = segments[segments.length - 1];
    const boundary =
      covers.length > 0 &&
      prev !== undefined &&
      prev.covers.length > 0 &&
      !sameCovers(prev.covers, covers);
    segments.push({
      start,
      length: end - start,
      text: cps.slice(start, end).join(""),
      covers,
      boundary,
    });
  }
  return segments;
}

/**
 * Render `text` with spans as <mark> highlights. Later spans paint on top
 * when ranges overlap, and a boundary rule marks every edge where coverage
 * changes mid-highlight.
 */
export function renderHighlights(
  doc: Document,
  text: string,
  spans: readonly Span[],
  colorByCategory: ReadonlyMap<number, string>,
): HTMLElement {
  const host = doc.createElement("div");
  host.className = "hl-text";
  for (const segment of segmentText(text, spans)) {
    if (segment.covers.length === 0) {
      host.append(doc.createTextNode(segment.text));
      continue;
    }
    const top = spans[segment.covers[segment.covers.length - 1]!]!;
    const color = colorByCategory.get(top.category_idx) ?? "#999999";
    const mark = doc.createElement("mark");
    mark.className = segment.covers.length > 1 ? "hl hl-overlap" : "hl";
    if (segment.boundary) mark.className += " hl-boundary";
    mark.style.backgroundColor = color;
    mark.dataset["color"] = color;
    mark.dataset["categoryIdx"] = String(top.category_idx);
    mark.dataset["spanIdxs"] = segment.covers.join(",");
    mark.textContent = segment.text;
    host.append(mark);
  }
  return host;
}

function clamp(value: number, max: number): number {
  return Math.min(Math.max(value, 0), max);
}

function sameCovers(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}
