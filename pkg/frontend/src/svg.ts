/** Tiny SVG string builder: enough for heatmaps, polylines, and axes. */

export type Attrs = Record<string, string | number>;

function attrs(a: Attrs): string {
  return Object.entries(a)
    .map(([k, v]) => `${k}="${v}"`)
    .join(" ");
}

export function el(tag: string, a: Attrs, children: string[] = []): string {
  const open = `<${tag} ${attrs(a)}`;
  if (children.length === 0) return `${open}/>`;
  return `${open}>${children.join("")}</${tag}>`;
}

export function text(content: string, a: Attrs): string {
  return el("text", a, [escapeXml(content)]);
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function svgDocument(width: number, height: number, children: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
    el("rect", { x: 0, y: 0, width, height, fill: "#ffffff" }),
    ...children,
    "</svg>",
  ].join("\n");
}

/** Light yellow to deep red ramp for demand heat, v in [0, 1]. */
export function heatColor(v: number): string {
  const t = Math.max(0, Math.min(1, v));
  const from = [255, 250, 229];
  const to = [165, 15, 21];
  const c = from.map((f, i) => Math.round(f + (to[i] - f) * t));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

export const COURIER_COLORS = [
  "#1f77b4",
  "#2ca02c",
  "#9467bd",
  "#17becf",
  "#e377c2",
  "#7f7f7f",
  "#bcbd22",
  "#ff7f0e",
  "#8c564b",
  "#3366cc",
];

export function courierColor(k: number): string {
  return COURIER_COLORS[k % COURIER_COLORS.length];
}

export interface LinearScale {
  (v: number): number;
  ticks(count: number): number[];
}

export function linearScale(
  domain: [number, number],
  range: [number, number]
): LinearScale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as LinearScale;
  fn.ticks = (count: number) => {
    const step = niceStep(span / Math.max(count, 1));
    const start = Math.ceil(d0 / step) * step;
    const out: number[] = [];
    for (let v = start; v <= d1 + 1e-9; v += step) out.push(roundTo(v, step));
    return out;
  };
  return fn;
}

function niceStep(raw: number): number {
  const mag = Math.pow(10, Math.floor(Math.log10(Math.abs(raw) || 1)));
  const norm = raw / mag;
  const nice = norm >= 5 ? 10 : norm >= 2 ? 5 : norm >= 1 ? 2 : 1;
  return nice * mag;
}

function roundTo(v: number, step: number): number {
  const digits = Math.max(0, -Math.floor(Math.log10(step)) + 1);
  return Number(v.toFixed(digits));
}
