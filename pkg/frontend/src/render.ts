// Render-tree drawing: the service describes each input example as a small
// tagged tree and the client turns it into DOM. Series nodes get an inline
// SVG line chart; everything else is plain semantic markup.

import type { RenderNode } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderNode(doc: Document, node: RenderNode): HTMLElement {
  switch (node.kind) {
    case "text": {
      const p = doc.createElement("p");
      p.className = "rt-text";
      p.textContent = node.content;
      return p;
    }
    case "kv": {
      const dl = doc.createElement("dl");
      dl.className = "rt-kv";
      for (const [key, value] of node.pairs) {
        const dt = doc.createElement("dt");
        dt.textContent = key;
        const dd = doc.createElement("dd");
        dd.textContent = value;
        dl.append(dt, dd);
      }
      return dl;
    }
    case "table": {
      const table = doc.createElement("table");
      table.className = "rt-table";
      const thead = doc.createElement("thead");
      const headRow = doc.createElement("tr");
      for (const cell of node.header) {
        const th = doc.createElement("th");
        th.textContent = cell;
        headRow.append(th);
      }
      thead.append(headRow);
      const tbody = doc.createElement("tbody");
      for (const row of node.rows) {
        const tr = doc.createElement("tr");
        for (const cell of row) {
          const td = doc.createElement("td");
          td.textContent = cell;
          tr.append(td);
        }
        tbody.append(tr);
      }
      table.append(thead, tbody);
      return table;
    }
    case "list": {
      const ul = doc.createElement("ul");
      ul.className = "rt-list";
      for (const item of node.items) {
        const li = doc.createElement("li");
        li.append(renderNode(doc, item));
        ul.append(li);
      }
      return ul;
    }
    case "series":
      return renderSeries(doc, node);
  }
}

const CHART_W = 360;
const CHART_H = 140;
const PAD = { left: 42, right: 10, top: 10, bottom: 24 };

function renderSeries(
  doc: Document,
  node: { name: string; x: string[]; y: number[]; unit: string },
): HTMLElement {
  const figure = doc.createElement("figure");
  figure.className = "rt-series";

  const caption = doc.createElement("figcaption");
  caption.textContent = node.unit ? `${node.name} (${node.unit})` : node.name;
  figure.append(caption);

  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${CHART_W} ${CHART_H}`);
  svg.setAttribute("class", "rt-chart");
  svg.setAttribute("role", "img");

  const points = chartPoints(node.y);
  if (points.length > 0) {
    const axis = doc.createElementNS(SVG_NS, "path");
    axis.setAttribute("class", "rt-chart-axis");
    axis.setAttribute(
      "d",
      `M ${PAD.left} ${PAD.top} V ${CHART_H - PAD.bottom} H ${CHART_W - PAD.right}`,
    );
    svg.append(axis);

    const line = doc.createElementNS(SVG_NS, "polyline");
    line.setAttribute("class", "rt-chart-line");
    line.setAttribute("points", points.map(([px, py]) => `${px},${py}`).join(" "));
    svg.append(line);

    for (const [i, [px, py]] of points.entries()) {
      const dot = doc.createElementNS(SVG_NS, "circle");
      dot.setAttribute("class", "rt-chart-dot");
      dot.setAttribute("cx", String(px));
      dot.setAttribute("cy", String(py));
      dot.setAttribute("r", "2.5");
      const title = doc.createElementNS(SVG_NS, "title");
      title.textContent = `${node.x[i] ?? i} = ${node.y[i]}`;
      dot.append(title);
      svg.append(dot);
    }

    const [lo, hi] = extent(node.y);
    svg.append(axisLabel(doc, PAD.left - 4, CHART_H - PAD.bottom, String(lo), "end"));
    svg.append(axisLabel(doc, PAD.left - 4, PAD.top + 8, String(hi), "end"));
    if (node.x.length > 0) {
      svg.append(axisLabel(doc, PAD.left, CHART_H - 6, node.x[0] ?? "", "start"));
      svg.append(axisLabel(doc, CHART_W - PAD.right, CHART_H - 6, node.x[node.x.length - 1] ?? "", "end"));
    }
  }

  figure.append(svg);
  return figure;
}

function axisLabel(doc: Document, x: number, y: number, text: string, anchor: string): SVGElement {
  const label = doc.createElementNS(SVG_NS, "text");
  label.setAttribute("class", "rt-chart-label");
  label.setAttribute("x", String(x));
  label.setAttribute("y", String(y));
  label.setAttribute("text-anchor", anchor);
  label.textContent = text;
  return label;
}

/** Map series values into chart coordinates; exported for direct testing. */
export function chartPoints(y: number[]): [number, number][] {
  if (y.length === 0) return [];
  const [lo, hi] = extent(y);
  const spanX = CHART_W - PAD.left - PAD.right;
  const spanY = CHART_H - PAD.top - PAD.bottom;
  const stepX = y.length > 1 ? spanX / (y.length - 1) : 0;
  return y.map((value, i) => {
    const frac = hi === lo ? 0.5 : (value - lo) / (hi - lo);
    const px = PAD.left + (y.length > 1 ? i * stepX : spanX / 2);
    const py = PAD.top + (1 - frac) * spanY;
    return [round2(px), round2(py)];
  });
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

function round2(n: number): number {
  return Math.round(n * 100) / 100;
}
