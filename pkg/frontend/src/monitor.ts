// Monitor page: read-only dashboard for one campaign. Polls progress on an
// interval and renders batch counts, per-category span totals, and every
// completed record with its spans highlighted over the output text.

import { Api } from "./api.js";
import { renderHighlights } from "./highlight.js";
import type { CampaignDetail, CompletedRecord, Progress } from "./types.js";

export const POLL_INTERVAL_MS = 5000;

export interface MonitorDeps {
  api: Api;
  campaignId: string;
  root: HTMLElement;
  intervalMs?: number;
}

export class MonitorPage {
  detail: CampaignDetail | null = null;
  progress: Progress | null = null;
  records: CompletedRecord[] = [];
  lastError = "";

  private readonly api: Api;
  private readonly campaignId: string;
  private readonly root: HTMLElement;
  private readonly doc: Document;
  private readonly intervalMs: number;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(deps: MonitorDeps) {
    this.api = deps.api;
    this.campaignId = deps.campaignId;
    this.root = deps.root;
    this.doc = deps.root.ownerDocument;
    this.intervalMs = deps.intervalMs ?? POLL_INTERVAL_MS;
  }

  /** One immediate poll, then steady polling until stop(). */
  async start(): Promise<void> {
    await this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async refresh(): Promise<void> {
    try {
      if (this.detail === null) this.detail = await this.api.campaign(this.campaignId);
      this.progress = await this.api.progress(this.campaignId);
      this.records = await this.api.records(this.campaignId);
      this.lastError = "";
    } catch (error) {
      this.lastError = error instanceof Error ? error.message : String(error);
    }
    this.render();
  }

  render(): void {
    this.root.textContent = "";
    const page = this.doc.createElement("div");
    page.className = "monitor";

    const header = this.doc.createElement("header");
    const title = this.doc.createElement("h1");
    title.textContent = this.campaignId;
    header.append(title);
    if (this.detail) {
      const meta = this.doc.createElement("p");
      meta.className = "meta";
      meta.textContent = `${this.detail.kind} campaign · ${this.detail.batch_count} batches · created ${this.detail.created_at}`;
      header.append(meta);
    }
    page.append(header);

    if (this.lastError) {
      const err = this.doc.createElement("p");
      err.className = "status-message";
      err.textContent = this.lastError;
      page.append(err);
    }

    if (this.progress) page.append(this.renderProgress(this.progress));
    page.append(this.renderRecords());
    this.root.append(page);
  }

  private renderProgress(progress: Progress): HTMLElement {
    const section = this.doc.createElement("section");
    section.className = "progress";

    const counts = this.doc.createElement("dl");
    counts.className = "batch-counts";
    for (const key of ["free", "assigned", "completed", "total"] as const) {
      const dt = this.doc.createElement("dt");
      dt.textContent = key;
      const dd = this.doc.createElement("dd");
      dd.className = `count-${key}`;
      dd.textContent = String(progress[key]);
      counts.append(dt, dd);
    }
    section.append(counts);

    const bar = this.doc.createElement("div");
    bar.className = "progress-bar";
    for (const key of ["completed", "assigned", "free"] as const) {
      const part = this.doc.createElement("div");
      part.className = `bar-${key}`;
      const share = progress.total > 0 ? progress[key] / progress.total : 0;
      part.style.width = `${(share * 100).toFixed(1)}%`;
      bar.append(part);
    }
    section.append(bar);

    const byCategory = this.doc.createElement("ul");
    byCategory.className = "category-counts";
    for (const category of this.detail?.categories ?? []) {
      const item = this.doc.createElement("li");
      const swatch = this.doc.createElement("span");
      swatch.className = "swatch";
      swatch.style.backgroundColor = category.color;
      const label = this.doc.createElement("span");
      const count = progress.per_category_span_counts[String(category.idx)] ?? 0;
      label.textContent = `${category.label}: ${count}`;
      item.append(swatch, label);
      byCategory.append(item);
    }
    section.append(byCategory);
    return section;
  }

  private renderRecords(): HTMLElement {
    const section = this.doc.createElement("section");
    section.className = "records";
    const heading = this.doc.createElement("h2");
    heading.textContent = `Completed records (${this.records.length})`;
    section.append(heading);

    const colors = new Map((this.detail?.categories ?? []).map((c) => [c.idx, c.color]));
    for (const record of this.records) {
      const card = this.doc.createElement("article");
      card.className = "record";

      const head = this.doc.createElement("h3");
      const ref = record.example;
      head.textContent = `${ref.dataset_id}/${ref.split}/${ref.setup_id}[${ref.example_idx}] · ${record.annotator_id} (${record.annotator_kind})`;
      card.append(head);

      card.append(renderHighlights(this.doc, record.output_text, record.spans, colors));

      const notes = record.spans.filter((s) => s.note);
      if (notes.length > 0) {
        const list = this.doc.createElement("ul");
        list.className = "record-notes";
        for (const span of notes) {
          const item = this.doc.createElement("li");
          item.textContent = `"${span.text}": ${span.note}`;
          list.append(item);
        }
        card.append(list);
      }
      section.append(card);
    }
    return section;
  }
}
