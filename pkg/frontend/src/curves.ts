/** Training-curve overlays: one line per labeled run. */

import { CurveRow } from "./types.js";
import { courierColor, el, linearScale, svgDocument, text } from "./svg.js";

export interface CurveSeries {
  label: string;
  rows: CurveRow[];
}

export interface CurvePlotOptions {
  column?: "eval_score" | "train_score" | "value_loss" | "mean_entropy";
  width?: number;
  height?: number;
  /** Smooth the column with a trailing mean over this many points (1 = raw). */
  smooth?: number;
}

const M = { left: 52, right: 16, top: 30, bottom: 38 };

export function renderCurves(series: CurveSeries[], options: CurvePlotOptions = {}): string {
  const column = options.column ?? "eval_score";
  const width = options.width ?? 640;
  const height = options.height ?? 400;
  const smooth = Math.max(1, options.smooth ?? 1);

  const lines = series.map((s) => ({
    label: s.label,
    points: smoothed(
      s.rows
        .filter((r) => r[column] !== null)
        .map((r) => [r.episode, r[column] as number] as [number, number]),
      smooth
    ),
  }));

  const all = lines.flatMap((l) => l.points);
  const xMax = all.length ? Math.max(...all.map((p) => p[0])) : 1;
  const xMin = all.length ? Math.min(...all.map((p) => p[0])) : 0;
  const yMax = all.length ? Math.max(...all.map((p) => p[1])) : 1;
  const yMin = all.length ? Math.min(0, ...all.map((p) => p[1])) : 0;

  const x = linearScale([xMin, xMax], [M.left, width - M.right]);
  const y = linearScale([yMin, yMax * 1.05 || 1], [height - M.bottom, M.top]);

  const parts: string[] = [];
  parts.push(text(`${column} by episode`, { x: M.left, y: 18, "font-size": 13, fill: "#222" }));

  for (const tick of x.ticks(6)) {
    parts.push(el("line", {
      x1: x(tick), y1: height - M.bottom, x2: x(tick), y2: height - M.bottom + 4,
      stroke: "#555",
    }));
    parts.push(text(String(tick), {
      x: x(tick), y: height - M.bottom + 16, "font-size": 10, fill: "#444",
      "text-anchor": "middle",
    }));
  }
  for (const tick of y.ticks(6)) {
    parts.push(el("line", {
      x1: M.left, y1: y(tick), x2: width - M.right, y2: y(tick),
      stroke: "#eeeeee",
    }));
    parts.push(text(tick.toPrecision(3).replace(/\.?0+$/, ""), {
      x: M.left - 6, y: y(tick) + 3, "font-size": 10, fill: "#444",
      "text-anchor": "end",
    }));
  }
  parts.push(el("line", {
    x1: M.left, y1: height - M.bottom, x2: width - M.right, y2: height - M.bottom,
    stroke: "#555",
  }));
  parts.push(el("line", {
    x1: M.left, y1: M.top, x2: M.left, y2: height - M.bottom, stroke: "#555",
  }));
  parts.push(text("episode", {
    x: (M.left + width - M.right) / 2, y: height - 8, "font-size": 11,
    fill: "#333", "text-anchor": "middle",
  }));

  lines.forEach((line, k) => {
    if (line.points.length === 0) return;
    const color = courierColor(k);
    parts.push(el("polyline", {
      points: line.points.map(([px, py]) => `${x(px).toFixed(1)},${y(py).toFixed(1)}`).join(" "),
      fill: "none",
      stroke: color,
      "stroke-width": 1.8,
    }));
    parts.push(el("line", {
      x1: width - M.right - 130, y1: M.top + 16 * k + 4,
      x2: width - M.right - 110, y2: M.top + 16 * k + 4,
      stroke: color, "stroke-width": 2,
    }));
    parts.push(text(line.label, {
      x: width - M.right - 104, y: M.top + 16 * k + 8, "font-size": 11, fill: "#333",
    }));
  });

  return svgDocument(width, height, parts);
}

function smoothed(points: [number, number][], window: number): [number, number][] {
  if (window <= 1) return points;
  const out: [number, number][] = [];
  for (let i = 0; i < points.length; i++) {
    const lo = Math.max(0, i - window + 1);
    const slice = points.slice(lo, i + 1);
    out.push([points[i][0], slice.reduce((a, p) => a + p[1], 0) / slice.length]);
  }
  return out;
}
