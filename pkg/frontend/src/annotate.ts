// Annotation page: claims a batch on load, walks the annotator through its
// examples one at a time, and submits the whole batch at the end. All state
// lives on the controller; render() redraws the page from it.

import { Api, ApiError } from "./api.js";
import { addDraft, removeDraft } from "./drafts.js";
import { renderHighlights } from "./highlight.js";
import { SnapError, selectionOffsets, selectionToSpan } from "./offsets.js";
import { renderNode } from "./render.js";
import type { NextBatch, Span, Violation } from "./types.js";
import { sameRef } from "./types.js";

export type PageState = "loading" | "annotating" | "no-work" | "done" | "failed";

export interface AnnotateDeps {
  api: Api;
  campaignId: string;
  annotatorId: string;
  root: HTMLElement;
}

export class AnnotatePage {
  state: PageState = "loading";
  batch: NextBatch | null = null;
  drafts: Span[][] = [];
  noErrors: boolean[] = [];
  current = 0;
  selectedCategory = 0;
  completionCode: string | null = null;
  statusMessage = "";
  violations: Violation[] = [];

  private readonly api: Api;
  private readonly campaignId: string;
  private readonly annotatorId: string;
  private readonly root: HTMLElement;
  private readonly doc: Document;
  private startedAt = "";
  private finishedAt: string | null = null;

  constructor(deps: AnnotateDeps) {
    this.api = deps.api;
    this.campaignId = deps.campaignId;
    this.annotatorId = deps.annotatorId;
    this.root = deps.root;
    this.doc = deps.root.ownerDocument;
    const win = this.doc.defaultView;
    if (win) {
      win.addEventListener("beforeunload", (event: Event) => {
        if (this.hasUnsavedWork()) {
          event.preventDefault();
          (event as BeforeUnloadEvent).returnValue = "true";
        }
      });
    }
  }

  async load(): Promise<void> {
    this.state = "loading";
    this.render();
    try {
      this.batch = await this.api.nextBatch(this.campaignId, this.annotatorId);
    } catch (error) {
      this.state = "failed";
      this.statusMessage = describe(error);
      this.render();
      return;
    }
    if (this.batch === null) {
      this.state = "no-work";
    } else {
      this.state = "annotating";
      this.drafts = this.batch.examples.map(() => []);
      this.noErrors = this.batch.examples.map(() => false);
      this.current = 0;
      this.selectedCategory = this.batch.categories[0]?.idx ?? 0;
      this.startedAt = wireTimestamp(new Date());
    }
    this.render();
  }

  hasUnsavedWork(): boolean {
    if (this.state !== "annotating") return false;
    return this.drafts.some((d) => d.length > 0) || this.noErrors.some(Boolean);
  }

  selectCategory(idx: number): void {
    this.selectedCategory = idx;
    this.render();
  }

  /** Turn a selection over the current output into a draft span. */
  addSelection(utf16Start: number, utf16End: number): boolean {
    const batch = this.batch;
    if (batch === null || this.state !== "annotating") return false;
    const example = batch.examples[this.current]!;
    let span: Span;
    try {
      span = selectionToSpan(example.output_text, utf16Start, utf16End, this.selectedCategory);
    } catch (error) {
      if (error instanceof SnapError || error instanceof RangeError) {
        this.statusMessage = error instanceof SnapError ? "nothing to annotate in that selection" : "";
        this.render();
        return false;
      }
      throw error;
    }
    this.statusMessage = "";
    this.drafts[this.current] = addDraft(this.drafts[this.current]!, span, example.output_text);
    this.noErrors[this.current] = false;
    this.render();
    return true;
  }

  /** Read the live DOM selection over the output panel, if any. */
  addSelectionFromDom(): void {
    const container = this.root.querySelector<HTMLElement>(".output-panel .hl-text");
    const selection = this.doc.defaultView?.getSelection();
    if (!container || !selection) return;
    const offsets = selectionOffsets(container, selection);
    if (offsets === null || offsets.start === offsets.end) return;
    this.addSelection(offsets.start, offsets.end);
    selection.removeAllRanges();
  }

  removeSpan(index: number): void {
    this.drafts[this.current] = removeDraft(this.drafts[this.current]!, index);
    this.render();
  }

  setNote(index: number, note: string): void {
    const spans = this.drafts[this.current]!;
    const span = spans[index];
    if (span) spans[index] = { ...span, note: note === "" ? null : note };
  }

  setNoErrors(checked: boolean): void {
    this.noErrors[this.current] = checked;
    this.render();
  }

  /** An example is finished once it has spans or an explicit all-clear. */
  exampleReady(index: number): boolean {
    return (this.drafts[index]?.length ?? 0) > 0 || this.noErrors[index] === true;
  }

  isLast(): boolean {
    return this.batch !== null && this.current === this.batch.examples.length - 1;
  }

  next(): void {
    if (!this.exampleReady(this.current) || this.batch === null) return;
    if (!this.isLast()) {
      this.current += 1;
      this.statusMessage = "";
      this.render();
    }
  }

  prev(): void {
    if (this.current > 0) {
      this.current -= 1;
      this.statusMessage = "";
      this.render();
    }
  }

  async submit(): Promise<void> {
    const batch = this.batch;
    if (batch === null || this.state !== "annotating") return;
    if (!batch.examples.every((_, i) => this.exampleReady(i))) {
      this.statusMessage = "every example needs spans or a no-errors confirmation";
      this.render();
      return;
    }
    // timestamps are pinned on the first attempt so a retry of the same
    // payload stays byte-identical and the server treats it as idempotent
    if (this.finishedAt === null) this.finishedAt = wireTimestamp(new Date());
    const payload = {
      annotator: this.annotatorId,
      batch_idx: batch.batch_idx,
      records: batch.examples.map((example, i) => ({
        example: example.example_ref,
        spans: this.drafts[i]!,
        started_at: this.startedAt,
        finished_at: this.finishedAt!,
        flags: this.noErrors[i] ? ["no_errors"] : [],
      })),
    };
    try {
      const result = await this.api.saveBatch(this.campaignId, payload);
      this.completionCode = result.completion_code;
      this.violations = [];
      this.state = "done";
    } catch (error) {
      if (error instanceof ApiError && error.violations.length > 0) {
        this.violations = error.violations;
        this.statusMessage = error.message;
        const firstBad = batch.examples.findIndex((ex) =>
          error.violations.some((v) => sameRef(v.example, ex.example_ref)),
        );
        if (firstBad >= 0) this.current = firstBad;
      } else {
        this.statusMessage = describe(error);
      }
    }
    this.render();
  }

  // -- drawing ---------------------------------------------------------------

  render(): void {
    this.root.textContent = "";
    switch (this.state) {
      case "loading":
        this.root.append(this.message("loading", "fetching your next batch..."));
        return;
      case "no-work":
        this.root.append(this.message("no-work", "No work available. Every batch is assigned or done; thanks for checking in."));
        return;
      case "failed":
        this.root.append(this.message("failed", this.statusMessage || "something went wrong"));
        return;
      case "done": {
        const box = this.doc.createElement("div");
        box.className = "completion";
        const head = this.doc.createElement("h2");
        head.textContent = "Batch submitted";
        const code = this.doc.createElement("p");
        code.className = "completion-code";
        code.textContent = this.completionCode ?? "";
        const hint = this.doc.createElement("p");
        hint.textContent = "Your completion code is above. Reload the page to pick up another batch.";
        box.append(head, code, hint);
        this.root.append(box);
        return;
      }
      case "annotating":
        this.renderAnnotating();
    }
  }

  private renderAnnotating(): void {
    const batch = this.batch!;
    const page = this.doc.createElement("div");
    page.className = "annotate";

    const header = this.doc.createElement("header");
    const title = this.doc.createElement("h1");
    title.textContent = this.campaignId;
    const meta = this.doc.createElement("p");
    meta.className = "meta";
    meta.textContent = `batch ${batch.batch_idx} · annotator ${this.annotatorId}`;
    header.append(title, meta);
    page.append(header);

    const instructions = this.doc.createElement("section");
    instructions.className = "instructions";
    instructions.textContent = batch.instructions;
    page.append(instructions);

    page.append(this.renderPalette());
    page.append(this.renderExample());
    this.root.append(page);
  }

  private renderPalette(): HTMLElement {
    const palette = this.doc.createElement("div");
    palette.className = "palette";
    for (const category of this.batch!.categories) {
      const button = this.doc.createElement("button");
      button.type = "button";
      button.className = category.idx === this.selectedCategory ? "cat selected" : "cat";
      button.dataset["categoryIdx"] = String(category.idx);
      button.title = category.description;
      const swatch = this.doc.createElement("span");
      swatch.className = "swatch";
      swatch.style.backgroundColor = category.color;
      const label = this.doc.createElement("span");
      label.textContent = category.label;
      button.append(swatch, label);
      button.addEventListener("click", () => this.selectCategory(category.idx));
      palette.append(button);
    }
    return palette;
  }

  private renderExample(): HTMLElement {
    const batch = this.batch!;
    const example = batch.examples[this.current]!;
    const colors = new Map(batch.categories.map((c) => [c.idx, c.color]));

    const section = this.doc.createElement("section");
    section.className = "example";

    const heading = this.doc.createElement("h2");
    heading.textContent = `Example ${this.current + 1} of ${batch.examples.length}`;
    section.append(heading);

    const input = this.doc.createElement("section");
    input.className = "input-panel";
    const inputLabel = this.doc.createElement("h3");
    inputLabel.textContent = "Input";
    input.append(inputLabel, renderNode(this.doc, example.render_tree.root));
    section.append(input);

    const output = this.doc.createElement("section");
    output.className = "output-panel";
    const outputLabel = this.doc.createElement("h3");
    outputLabel.textContent = "Model output";
    const text = renderHighlights(this.doc, example.output_text, this.drafts[this.current]!, colors);
    text.addEventListener("mouseup", () => this.addSelectionFromDom());
    output.append(outputLabel, text);
    section.append(output);

    section.append(this.renderDraftList(colors));

    const confirm = this.doc.createElement("label");
    confirm.className = "no-errors";
    const checkbox = this.doc.createElement("input");
    checkbox.type = "checkbox";
    checkbox.checked = this.noErrors[this.current]!;
    checkbox.addEventListener("change", () => this.setNoErrors(checkbox.checked));
    confirm.append(checkbox, this.doc.createTextNode(" No errors in this output"));
    section.append(confirm);

    if (this.statusMessage) {
      const status = this.doc.createElement("p");
      status.className = "status-message";
      status.textContent = this.statusMessage;
      section.append(status);
    }

    section.append(this.renderNav());
    return section;
  }

  private renderDraftList(colors: ReadonlyMap<number, string>): HTMLElement {
    const batch = this.batch!;
    const example = batch.examples[this.current]!;
    const labels = new Map(batch.categories.map((c) => [c.idx, c.label]));
    const list = this.doc.createElement("ul");
    list.className = "draft-list";
    for (const [i, span] of this.drafts[this.current]!.entries()) {
      const item = this.doc.createElement("li");
      item.className = "draft";

      const chip = this.doc.createElement("span");
      chip.className = "chip";
      chip.style.backgroundColor = colors.get(span.category_idx) ?? "#999999";
      chip.textContent = labels.get(span.category_idx) ?? String(span.category_idx);

      const quote = this.doc.createElement("span");
      quote.className = "quote";
      quote.textContent = `"${span.text}"`;

      const note = this.doc.createElement("input");
      note.type = "text";
      note.className = "note";
      note.placeholder = "note (optional)";
      note.value = span.note ?? "";
      note.addEventListener("change", () => this.setNote(i, note.value));

      const remove = this.doc.createElement("button");
      remove.type = "button";
      remove.className = "remove";
      remove.textContent = "remove";
      remove.addEventListener("click", () => this.removeSpan(i));

      item.append(chip, quote, note, remove);
      for (const violation of this.violations) {
        if (sameRef(violation.example, example.example_ref) && violation.span_index === i) {
          const problem = this.doc.createElement("span");
          problem.className = "violation";
          problem.textContent = `${violation.code}: ${violation.detail}`;
          item.append(problem);
        }
      }
      list.append(item);
    }
    return list;
  }

  private renderNav(): HTMLElement {
    const nav = this.doc.createElement("nav");
    nav.className = "pager";

    const back = this.doc.createElement("button");
    back.type = "button";
    back.className = "prev";
    back.textContent = "Back";
    back.disabled = this.current === 0;
    back.addEventListener("click", () => this.prev());
    nav.append(back);

    const ready = this.exampleReady(this.current);
    if (this.isLast()) {
      const submit = this.doc.createElement("button");
      submit.type = "button";
      submit.className = "submit";
      submit.textContent = "Submit batch";
      submit.disabled = !ready;
      submit.addEventListener("click", () => void this.submit());
      nav.append(submit);
    } else {
      const forward = this.doc.createElement("button");
      forward.type = "button";
      forward.className = "next";
      forward.textContent = "Next example";
      forward.disabled = !ready;
      forward.addEventListener("click", () => this.next());
      nav.append(forward);
    }
    return nav;
  }

  private message(kind: string, text: string): HTMLElement {
    const box = this.doc.createElement("div");
    box.className = `page-message ${kind}`;
    const p = this.doc.createElement("p");
    p.textContent = text;
    box.append(p);
    return box;
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}

// the service stores second-precision UTC timestamps, no fraction
function wireTimestamp(date: Date): string {
  return date.toISOString().slice(0, 19) + "Z";
}
