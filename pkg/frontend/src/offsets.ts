// Offset math between what the browser reports (UTF-16 code units) and what
// the service stores (Unicode code points). Everything here is pure.

import type { Span } from "./types.js";

/** Split into code points; each element is one code point, surrogate pairs intact. */
export function codePoints(text: string): string[] {
  return Array.from(text);
}

export function codePointLength(text: string): number {
  let n = 0;
  // eslint-free manual loop; Array.from allocates, this does not
  for (const _ of text) n += 1;
  return n;
}

/** Slice by code-point offsets, the service's (start, length) convention. */
export function codePointSlice(text: string, start: number, length: number): string {
  return codePoints(text).slice(start, start + length).join("");
}

export class SnapError extends Error {
  readonly code = "EMPTY_AFTER_SNAP";

  constructor() {
    super("selection contains no annotatable text");
    this.name = "SnapError";
  }
}

// Word characters for snapping. Deliberately narrow: snapping must never
// cross an emoji, CJK character, or punctuation, so a selection inside
// "a🌧b" stays on one side of the emoji.
const WORD_RE = /^[A-Za-z0-9_]$/;
const SPACE_RE = /^\s$/u;

function isWord(cp: string | undefined): boolean {
  return cp !== undefined && WORD_RE.test(cp);
}

/**
 * Convert a browser selection to a draft span.
 *
 * Input offsets are UTF-16 code units over `text`, end-exclusive. The
 * selection is trimmed of surrounding whitespace, then grown outward to
 * whole-word boundaries, and the result is expressed in code points with
 * the covered text attached.
 *
 * Throws SnapError when trimming leaves nothing, and RangeError for
 * offsets outside 0 <= start < end <= text.length.
 */
export function selectionToSpan(
  text: string,
  utf16Start: number,
  utf16End: number,
  categoryIdx: number,
): Span {
  if (!(utf16Start >= 0 && utf16Start < utf16End && utf16End <= text.length)) {
    throw new RangeError(`bad selection range [${utf16Start}, ${utf16End}) over ${text.length} units`);
  }
  const cps = codePoints(text);

  // code-point index owning each end; a selection cutting a surrogate pair
  // in half widens to cover the whole code point
  let unit = 0;
  let start = 0;
  let end = cps.length;
  for (let i = 0; i < cps.length; i += 1) {
    const width = cps[i]!.length;
    if (unit <= utf16Start && utf16Start < unit + width) start = i;
    if (unit < utf16End && utf16End <= unit + width) end = i + 1;
    unit += width;
  }

  while (start < end && SPACE_RE.test(cps[start]!)) start += 1;
  while (end > start && SPACE_RE.test(cps[end - 1]!)) end -= 1;
  if (start === end) throw new SnapError();

  while (start > 0 && isWord(cps[start]) && isWord(cps[start - 1])) start -= 1;
  while (end < cps.length && isWord(cps[end - 1]) && isWord(cps[end])) end += 1;

  return {
    start,
    length: end - start,
    category_idx: categoryIdx,
    text: cps.slice(start, end).join(""),
    note: null,
  };
}

/**
 * UTF-16 offsets of a DOM selection relative to all text inside `container`,
 * or null when the selection does not start and end inside it. Highlight
 * rendering splits the text over many nodes, so offsets are accumulated
 * across every text node in document order.
 */
export function selectionOffsets(
  container: HTMLElement,
  selection: { anchorNode: Node | null; anchorOffset: number; focusNode: Node | null; focusOffset: number },
): { start: number; end: number } | null {
  const anchor = textOffset(container, selection.anchorNode, selection.anchorOffset);
  const focus = textOffset(container, selection.focusNode, selection.focusOffset);
  if (anchor === null || focus === null) return null;
  return anchor <= focus ? { start: anchor, end: focus } : { start: focus, end: anchor };
}

function textOffset(container: HTMLElement, node: Node | null, offset: number): number | null {
  if (node === null) return null;
  let seen = 0;
  let found = false;

  const walk = (current: Node): void => {
    if (found) return;
    if (current === node) {
      // offset is in code units for text nodes, in child slots otherwise
      if (current.nodeType === 3) {
        seen += offset;
      } else {
        const kids = current.childNodes;
        for (let i = 0; i < offset && i < kids.length; i += 1) walk(kids[i]!);
      }
      found = true;
      return;
    }
    if (current.nodeType === 3) {
      seen += (current.textContent ?? "").length;
      return;
    }
    for (const child of Array.from(current.childNodes)) {
      walk(child);
      if (found) return;
    }
  };

  walk(container);
  return found ? seen : null;
}
