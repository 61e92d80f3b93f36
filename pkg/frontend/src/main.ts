// Entry point: route by pathname. The service serves this bundle on /,
// /annotate/{campaign}, and /monitor/{campaign}.

import { Api } from "./api.js";
import { AnnotatePage } from "./annotate.js";
import { MonitorPage } from "./monitor.js";

function appRoot(doc: Document): HTMLElement {
  const existing = doc.getElementById("app");
  if (existing) return existing;
  const created = doc.createElement("div");
  created.id = "app";
  doc.body.append(created);
  return created;
}

async function landing(api: Api, root: HTMLElement): Promise<void> {
  const doc = root.ownerDocument;
  root.textContent = "";
  const page = doc.createElement("div");
  page.className = "landing";
  const title = doc.createElement("h1");
  title.textContent = "Annotation campaigns";
  page.append(title);

  try {
    const campaigns = await api.listCampaigns();
    if (campaigns.length === 0) {
      const empty = doc.createElement("p");
      empty.textContent = "No campaigns yet. Create one with the CLI, then reload.";
      page.append(empty);
    }
    const list = doc.createElement("ul");
    list.className = "campaign-list";
    for (const campaign of campaigns) {
      const item = doc.createElement("li");
      const name = doc.createElement("strong");
      name.textContent = `${campaign.campaign_id} (${campaign.kind}, ${campaign.batch_count} batches)`;
      const annotate = doc.createElement("a");
      annotate.href = `/annotate/${campaign.campaign_id}`;
      annotate.textContent = "annotate";
      const monitor = doc.createElement("a");
      monitor.href = `/monitor/${campaign.campaign_id}`;
      monitor.textContent = "monitor";
      item.append(name, doc.createTextNode(" "), annotate, doc.createTextNode(" · "), monitor);
      list.append(item);
    }
    page.append(list);
  } catch (error) {
    const err = doc.createElement("p");
    err.className = "status-message";
    err.textContent = error instanceof Error ? error.message : String(error);
    page.append(err);
  }
  root.append(page);
}

function askAnnotatorId(root: HTMLElement, campaignId: string): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const box = doc.createElement("form");
  box.className = "who-are-you";
  const label = doc.createElement("label");
  label.textContent = `Annotator id for ${campaignId}: `;
  const input = doc.createElement("input");
  input.type = "text";
  input.name = "annotator";
  input.required = true;
  const go = doc.createElement("button");
  go.type = "submit";
  go.textContent = "Start";
  label.append(input);
  box.append(label, go);
  box.addEventListener("submit", (event) => {
    event.preventDefault();
    const id = input.value.trim();
    if (id) {
      const url = new URL(doc.defaultView!.location.href);
      url.searchParams.set("annotator", id);
      doc.defaultView!.location.href = url.toString();
    }
  });
  root.append(box);
}

export function boot(doc: Document): void {
  const api = new Api("");
  const root = appRoot(doc);
  const path = doc.defaultView?.location.pathname ?? "/";
  const params = new URLSearchParams(doc.defaultView?.location.search ?? "");

  const annotateMatch = path.match(/^\/annotate\/([A-Za-z0-9][A-Za-z0-9_-]*)$/);
  if (annotateMatch) {
    const campaignId = annotateMatch[1]!;
    const annotator = params.get("annotator");
    if (!annotator) {
      askAnnotatorId(root, campaignId);
      return;
    }
    void new AnnotatePage({ api, campaignId, annotatorId: annotator, root }).load();
    return;
  }

  const monitorMatch = path.match(/^\/monitor\/([A-Za-z0-9][A-Za-z0-9_-]*)$/);
  if (monitorMatch) {
    void new MonitorPage({ api, campaignId: monitorMatch[1]!, root }).start();
    return;
  }

  void landing(api, root);
}

boot(document);
