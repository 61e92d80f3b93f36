// Draft spans for one output text while a human annotates it. Drafts never
// overlap: a new selection claims its range outright and whatever it covers
// of older drafts is cut away (split in two when swallowed in the middle).

import { codePointSlice } from "./offsets.js";
import type { Span } from "./types.js";

/** Insert `next`, trimming or splitting older drafts it overlaps. */
export function addDraft(drafts: readonly Span[], next: Span, fullText: string): Span[] {
  const nextEnd = next.start + next.length;
  const kept: Span[] = [];
  for (const d of drafts) {
    const dEnd = d.start + d.length;
    if (dEnd <= next.start || d.start >= nextEnd) {
      kept.push(d);
      continue;
    }
    if (d.start < next.start) kept.push(piece(d, d.start, next.start, fullText));
    if (dEnd > nextEnd) kept.push(piece(d, nextEnd, dEnd, fullText));
  }
  kept.push({ ...next });
  kept.sort((a, b) => a.start - b.start || a.length - b.length);
  return kept;
}

export function removeDraft(drafts: readonly Span[], index: number): Span[] {
  return drafts.filter((_, i) => i !== index);
}

function piece(source: Span, start: number, end: number, fullText: string): Span {
  return {
    start,
    length: end - start,
    category_idx: source.category_idx,
    text: codePointSlice(fullText, start, end - start),
    note: source.note,
  };
}
