/** Minimal SVG assembly: rendering only, no external dependencies. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const WIDTH = 680;
export const HEIGHT = 420;
export const MARGIN: Margin = { top: 48, right: 24, bottom: 56, left: 72 };

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function el(tag: string, attrs: Record<string, string | number>, body = ""): string {
  const rendered = Object.entries(attrs)
    .map(([k, v]) => `${k}="${v}"`)
    .join(" ");
  return body === "" ? `<${tag} ${rendered}/>` : `<${tag} ${rendered}>${body}</${tag}>`;
}

export function text(
  x: number,
  y: number,
  content: string,
  opts: { size?: number; anchor?: string; fill?: string; rotate?: number } = {},
): string {
  const attrs: Record<string, string | number> = {
    x: x.toFixed(1),
    y: y.toFixed(1),
    "font-family": "sans-serif",
    "font-size": opts.size ?? 12,
    "text-anchor": opts.anchor ?? "start",
    fill: opts.fill ?? "#222",
  };
  if (opts.rotate !== undefined) {
    attrs.transform = `rotate(${opts.rotate} ${x.toFixed(1)} ${y.toFixed(1)})`;
  }
  return el("text", attrs, esc(content));
}

/** Round tick values up/down to pleasant numbers. */
export function niceTicks(max: number, count = 5): number[] {
  if (max <= 0) return [0, 1];
  const step = Math.pow(10, Math.floor(Math.log10(max / count)));
  const candidates = [step, 2 * step, 5 * step, 10 * step];
  const chosen = candidates.find((c) => max / c <= count) ?? 10 * step;
  const ticks: number[] = [];
  for (let v = 0; v <= max * 1.0001; v += chosen) ticks.push(v);
  return ticks;
}

export function document(body: string, title: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
    el("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "#ffffff" }),
    text(WIDTH / 2, 24, title, { size: 15, anchor: "middle" }),
    body,
    "</svg>",
  ].join("\n");
}

/** Left and bottom axis lines with horizontal y-grid and tick labels. */
export function yAxis(ticks: number[], yScale: (v: number) => number, label: string): string {
  const parts: string[] = [];
  for (const t of ticks) {
    const y = yScale(t);
    parts.push(
      el("line", {
        x1: MARGIN.left,
        y1: y.toFixed(1),
        x2: WIDTH - MARGIN.right,
        y2: y.toFixed(1),
        stroke: "#dddddd",
        "stroke-width": 1,
      }),
    );
    parts.push(text(MARGIN.left - 8, y + 4, String(Math.round(t * 100) / 100), { anchor: "end", size: 11 }));
  }
  parts.push(
    el("line", {
      x1: MARGIN.left,
      y1: MARGIN.top,
      x2: MARGIN.left,
      y2: HEIGHT - MARGIN.bottom,
      stroke: "#222",
      "stroke-width": 1,
    }),
    el("line", {
      x1: MARGIN.left,
      y1: HEIGHT - MARGIN.bottom,
      x2: WIDTH - MARGIN.right,
      y2: HEIGHT - MARGIN.bottom,
      stroke: "#222",
      "stroke-width": 1,
    }),
    text(16, HEIGHT / 2, label, { anchor: "middle", rotate: -90, size: 13 }),
  );
  return parts.join("\n");
}
