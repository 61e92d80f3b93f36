// Wire shapes as the service emits them. Kept as plain interfaces so the
// client stays a thin JSON pass-through.

export interface ExampleRef {
  dataset_id: string;
  split: string;
  setup_id: string;
  example_idx: number;
}

export interface Category {
  idx: number;
  label: string;
  color: string;
  description: string;
}

export interface Span {
  start: number;
  length: number;
  category_idx: number;
  text: string;
  note: string | null;
}

export type RenderNode =
  | { kind: "text"; content: string }
  | { kind: "kv"; pairs: [string, string][] }
  | { kind: "table"; header: string[]; rows: string[][] }
  | { kind: "list"; items: RenderNode[] }
  | { kind: "series"; name: string; x: string[]; y: number[]; unit: string };

export interface RenderTree {
  root: RenderNode;
}

export interface BatchExample {
  example_ref: ExampleRef;
  render_tree: RenderTree;
  output_text: string;
}

export interface NextBatch {
  batch_idx: number;
  examples: BatchExample[];
  categories: Category[];
  instructions: string;
}

export interface CampaignDetail {
  campaign_id: string;
  kind: string;
  created_at: string;
  sources: { dataset_id: string; split: string; setup_id: string }[];
  categories: Category[];
  instructions: string;
  batch_count: number;
}

export interface CampaignSummary {
  campaign_id: string;
  kind: string;
  created_at: string;
  batch_count: number;
}

export interface Progress {
  free: number;
  assigned: number;
  completed: number;
  total: number;
  per_category_span_counts: Record<string, number>;
}

export interface CompletedRecord {
  campaign_id: string;
  example: ExampleRef;
  annotator_id: string;
  annotator_kind: string;
  spans: Span[];
  flags: string[];
  started_at: string;
  finished_at: string;
  extra: Record<string, unknown> | null;
  output_text: string;
}

export interface Violation {
  example: ExampleRef;
  span_index: number;
  code: string;
  detail: string;
}

export interface SaveRecord {
  example: ExampleRef;
  spans: Span[];
  started_at?: string;
  finished_at?: string;
  flags?: string[];
}

export interface SavePayload {
  annotator: string;
  batch_idx: number;
  records: SaveRecord[];
}

export function sameRef(a: ExampleRef, b: ExampleRef): boolean {
  return (
    a.dataset_id === b.dataset_id &&
    a.split === b.split &&
    a.setup_id === b.setup_id &&
    a.example_idx === b.example_idx
  );
}
