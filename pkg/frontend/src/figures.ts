/**
 * Figure renderers over bench rows. These only aggregate for display
 * (means across seeds, rank correlation of the plotted points); measurements
 * are never altered or re-derived.
 */
import type { BenchRow } from "./schema.js";
import { groupBy, mean, spearman } from "./stats.js";
import { HEIGHT, MARGIN, WIDTH, document as svgDocument, el, niceTicks, text, yAxis } from "./svg.js";

export class FigureError extends Error {}

export interface RenderResult {
  svg: string;
  warnings: string[];
}

const PLOT_W = WIDTH - MARGIN.left - MARGIN.right;
const PLOT_H = HEIGHT - MARGIN.top - MARGIN.bottom;

function yScaleFor(maxValue: number): (v: number) => number {
  return (v: number) => HEIGHT - MARGIN.bottom - (v / maxValue) * PLOT_H;
}

/** Throughput against shot count: line + points, Spearman rho annotated. */
export function renderShotsSweep(rows: BenchRow[]): RenderResult {
  const byShots = groupBy(rows, (r) => String(r.shots));
  if (byShots.size < 2) {
    throw new FigureError(
      `need >= 2 shot values to draw a sweep, got ${byShots.size}`,
    );
  }
  const points = [...byShots.entries()]
    .map(([shots, group]) => ({
      shots: Number(shots),
      tps: mean(group.map((r) => r.tokens_per_sec)),
    }))
    .sort((a, b) => a.shots - b.shots);

  const rho = spearman(
    points.map((p) => p.shots),
    points.map((p) => p.tps),
  );
  const maxShots = points[points.length - 1].shots;
  const minShots = points[0].shots;
  const maxTps = Math.max(...points.map((p) => p.tps));
  const ticks = niceTicks(maxTps);
  const yScale = yScaleFor(ticks[ticks.length - 1]);
  const xScale = (s: number) =>
    MARGIN.left + ((s - minShots) / Math.max(maxShots - minShots, 1e-9)) * PLOT_W;

  const parts: string[] = [yAxis(ticks, yScale, "tokens / sec")];
  const path = points.map((p) => `${xScale(p.shots).toFixed(1)},${yScale(p.tps).toFixed(1)}`).join(" ");
  parts.push(el("polyline", { points: path, fill: "none", stroke: "#1f77b4", "stroke-width": 2 }));
  for (const p of points) {
    parts.push(
      el("circle", { cx: xScale(p.shots).toFixed(1), cy: yScale(p.tps).toFixed(1), r: 4, fill: "#1f77b4" }),
      text(xScale(p.shots), HEIGHT - MARGIN.bottom + 18, String(p.shots), { anchor: "middle", size: 12 }),
      text(xScale(p.shots), yScale(p.tps) - 10, p.tps.toFixed(1), { anchor: "middle", size: 11, fill: "#1f77b4" }),
    );
  }
  parts.push(
    text(WIDTH / 2, HEIGHT - 12, "in-context examples (shots)", { anchor: "middle", size: 13 }),
    text(
      WIDTH - MARGIN.right,
      MARGIN.top - 8,
      rho === null ? "spearman: n/a" : `spearman ρ = ${rho.toFixed(3)}`,
      { anchor: "end", size: 12, fill: "#555" },
    ),
  );
  return {
    svg: svgDocument(parts.join("\n"), "Decode throughput vs. prompt shots"),
    warnings: [],
  };
}

function dipLabel(row: BenchRow): string {
  const eps = row.epsilon === null ? "?" : String(row.epsilon);
  return `dip(λ=${row.lambda}, ε=${eps})`;
}

function barChart(
  groups: { label: string; tps: number; n: number }[],
  reference: { label: string; tps: number },
  title: string,
  warnings: string[],
): RenderResult {
  const maxTps = Math.max(...groups.map((g) => g.tps));
  const ticks = niceTicks(maxTps);
  const yScale = yScaleFor(ticks[ticks.length - 1]);
  const slot = PLOT_W / groups.length;
  const barW = Math.min(slot * 0.6, 90);

  const parts: string[] = [yAxis(ticks, yScale, "tokens / sec")];
  groups.forEach((g, i) => {
    const x = MARGIN.left + slot * i + (slot - barW) / 2;
    const y = yScale(g.tps);
    parts.push(
      el("rect", {
        x: x.toFixed(1),
        y: y.toFixed(1),
        width: barW.toFixed(1),
        height: (HEIGHT - MARGIN.bottom - y).toFixed(1),
        fill: g.label === reference.label ? "#888888" : "#1f77b4",
      }),
      text(x + barW / 2, y - 22, g.tps.toFixed(1), { anchor: "middle", size: 12 }),
      text(x + barW / 2, y - 8, `(${(g.tps / reference.tps).toFixed(1)}×)`, {
        anchor: "middle",
        size: 11,
        fill: "#1f77b4",
      }),
      text(x + barW / 2, HEIGHT - MARGIN.bottom + 18, g.label, { anchor: "middle", size: 11 }),
    );
    if (g.n > 1) {
      parts.push(text(x + barW / 2, HEIGHT - MARGIN.bottom + 32, `n=${g.n}`, { anchor: "middle", size: 10, fill: "#777" }));
    }
  });
  parts.push(
    text(MARGIN.left, HEIGHT - 12, `speedups relative to ${reference.label}`, { size: 11, fill: "#555" }),
  );
  return { svg: svgDocument(parts.join("\n"), title), warnings };
}

/** Mean throughput per method (dip split per lambda/epsilon), speedup labels. */
export function renderMethodCompare(rows: BenchRow[]): RenderResult {
  if (rows.length === 0) throw new FigureError("no rows to compare");
  const byMethod = groupBy(rows, (r) => (r.method === "dip" ? dipLabel(r) : r.method));
  if (byMethod.size < 2) {
    throw new FigureError(`need rows for >= 2 methods, got ${byMethod.size}`);
  }
  const groups = [...byMethod.entries()].map(([label, group]) => ({
    label,
    tps: mean(group.map((r) => r.tokens_per_sec)),
    n: group.length,
  }));
  groups.sort((a, b) => a.tps - b.tps);

  const warnings: string[] = [];
  let reference = groups.find((g) => g.label === "baseline");
  if (!reference) {
    reference = groups[0]; // slowest method present
    warnings.push(
      `no baseline rows; speedups are relative to the slowest method (${reference.label})`,
    );
  }
  return barChart(groups, reference, "Decode throughput by method", warnings);
}

/** Planner ablation grid: one bar per (lambda, epsilon) combination. */
export function renderGrid(rows: BenchRow[]): RenderResult {
  const dipRows = rows.filter((r) => r.method === "dip");
  if (dipRows.length === 0) {
    throw new FigureError("grid figure needs dip rows with lambda/epsilon values");
  }
  const byCombo = groupBy(dipRows, dipLabel);
  const groups = [...byCombo.entries()].map(([label, group]) => ({
    label,
    tps: mean(group.map((r) => r.tokens_per_sec)),
    n: group.length,
  }));
  groups.sort((a, b) => a.label.localeCompare(b.label));
  const reference = groups.reduce((lo, g) => (g.tps < lo.tps ? g : lo), groups[0]);
  return barChart(groups, reference, "Planner throughput over λ/ε settings", []);
}

export const FIGURE_KINDS = ["shots_sweep", "method_compare", "grid"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export function renderFigure(kind: FigureKind, rows: BenchRow[]): RenderResult {
  switch (kind) {
    case "shots_sweep":
      return renderShotsSweep(rows);
    case "method_compare":
      return renderMethodCompare(rows);
    case "grid":
      return renderGrid(rows);
  }
}
