/** Courier-trajectory panels: demand heat background plus per-courier paths. */

import { TrajectoryDoc, TrajectoryRun } from "./types.js";
import { courierColor, el, heatColor, svgDocument, text } from "./svg.js";

export interface TrajectoryPlotOptions {
  /** Heat/paths are drawn up to this minute; defaults to the heat window. */
  untilMinute?: number;
  cellPx?: number;
  columns?: number;
}

const MARGIN = 28;
const TITLE_H = 22;
const GAP = 18;

export function renderTrajectories(doc: TrajectoryDoc, options: TrajectoryPlotOptions = {}): string {
  const { width, height } = doc.world;
  const cell = options.cellPx ?? Math.max(10, Math.round(320 / Math.max(width, height)));
  const until = options.untilMinute ?? Math.min(doc.heat.window_minutes, doc.horizon);
  const columns = options.columns ?? Math.min(Math.max(doc.runs.length, 1), 2);

  const panelW = width * cell + 2 * MARGIN;
  const panelH = height * cell + TITLE_H + MARGIN;
  const rows = Math.max(Math.ceil(doc.runs.length / columns), 1);
  const totalW = columns * panelW + (columns - 1) * GAP;
  const totalH = rows * panelH + (rows - 1) * GAP;

  const heat = heatAt(doc, until);
  const peak = Math.max(...heat, 1e-9);

  const panels = doc.runs.map((run, k) => {
    const px = (k % columns) * (panelW + GAP);
    const py = Math.floor(k / columns) * (panelH + GAP);
    return el("g", { transform: `translate(${px},${py})` }, [
      panel(doc, run, heat, peak, cell, until),
    ]);
  });
  if (panels.length === 0) {
    panels.push(el("g", {}, [panel(doc, null, heat, peak, cell, until)]));
  }
  return svgDocument(totalW, totalH, panels);
}

function heatAt(doc: TrajectoryDoc, minute: number): number[] {
  const { times, values } = doc.heat;
  if (times.length === 0) {
    return new Array(doc.world.width * doc.world.height).fill(0);
  }
  let best = 0;
  for (let i = 0; i < times.length; i++) {
    if (times[i] <= minute + 1e-9) best = i;
  }
  return values[best];
}

function panel(
  doc: TrajectoryDoc,
  run: TrajectoryRun | null,
  heat: number[],
  peak: number,
  cell: number,
  until: number
): string {
  const { width, height } = doc.world;
  const x0 = MARGIN;
  const y0 = TITLE_H;
  const parts: string[] = [];

  const title = run
    ? `${run.label}  (score ${(run.score * 100).toFixed(1)}%, first ${Math.round(until)} min)`
    : "no runs";
  parts.push(text(title, { x: x0, y: 15, "font-size": 13, fill: "#222" }));

  // heat background; SVG y runs downward, board y runs upward
  for (let gy = 0; gy < height; gy++) {
    for (let gx = 0; gx < width; gx++) {
      const v = heat[gy * width + gx];
      parts.push(
        el("rect", {
          x: x0 + gx * cell,
          y: y0 + (height - 1 - gy) * cell,
          width: cell,
          height: cell,
          fill: heatColor(v / peak),
          stroke: "#dddddd",
          "stroke-width": 0.5,
        })
      );
    }
  }

  if (run) {
    run.couriers.forEach((courier, k) => {
      const color = courierColor(k);
      const pts: [number, number][] = [];
      for (const step of courier.steps) {
        if (step.t > until) break;
        if (pts.length === 0) pts.push(gridPoint(step.from, width, height, cell, x0, y0));
        pts.push(gridPoint(step.to, width, height, cell, x0, y0));
      }
      if (pts.length === 0) return;
      parts.push(
        el("polyline", {
          points: pts.map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`).join(" "),
          fill: "none",
          stroke: color,
          "stroke-width": 2,
          "stroke-opacity": 0.85,
          "stroke-linejoin": "round",
        })
      );
      const [sx, sy] = pts[0];
      const [ex, ey] = pts[pts.length - 1];
      parts.push(el("circle", { cx: sx, cy: sy, r: 3.5, fill: color }));
      parts.push(
        el("rect", { x: ex - 3, y: ey - 3, width: 6, height: 6, fill: color })
      );
    });
  }

  parts.push(
    el("rect", {
      x: x0,
      y: y0,
      width: width * cell,
      height: height * cell,
      fill: "none",
      stroke: "#555555",
    })
  );
  return el("g", {}, parts);
}

function gridPoint(
  [gx, gy]: [number, number],
  width: number,
  height: number,
  cell: number,
  x0: number,
  y0: number
): [number, number] {
  return [x0 + (gx + 0.5) * cell, y0 + (height - 1 - gy + 0.5) * cell];
}
