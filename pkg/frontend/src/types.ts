/** Schemas of the files the simulation lab exports. */

export interface TrajectoryStep {
  t: number;
  from: [number, number];
  to: [number, number];
  patrol: number;
  reward: number;
  completion: number | null;
}

export interface CourierTrack {
  id: number;
  fleet: string;
  steps: TrajectoryStep[];
}

export interface TrajectoryRun {
  label: string;
  score: number;
  couriers: CourierTrack[];
}

export interface HeatField {
  window_minutes: number;
  times: number[];
  /** values[i][g]: trailing-window request price of grid g at times[i], row-major grids */
  values: number[][];
}

export interface TrajectoryDoc {
  world: { width: number; height: number };
  horizon: number;
  heat: HeatField;
  runs: TrajectoryRun[];
}

export interface CurveRow {
  episode: number;
  train_score: number | null;
  eval_score: number | null;
  value_loss: number | null;
  mean_entropy: number | null;
}

export class MalformedFileError extends Error {}

export function parseTrajectoryDoc(text: string, source: string): TrajectoryDoc {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new MalformedFileError(`${source}: not valid JSON (${(e as Error).message})`);
  }
  const d = doc as TrajectoryDoc;
  if (!d || typeof d !== "object") throw new MalformedFileError(`${source}: not an object`);
  if (!d.world || typeof d.world.width !== "number" || typeof d.world.height !== "number") {
    throw new MalformedFileError(`${source}: missing world.width/height`);
  }
  if (!Array.isArray(d.runs)) throw new MalformedFileError(`${source}: missing runs array`);
  d.runs.forEach((run, i) => {
    if (typeof run.label !== "string") {
      throw new MalformedFileError(`${source}: runs[${i}].label missing`);
    }
    if (!Array.isArray(run.couriers)) {
      throw new MalformedFileError(`${source}: runs[${i}].couriers missing`);
    }
    run.couriers.forEach((c, j) => {
      if (!Array.isArray(c.steps)) {
        throw new MalformedFileError(`${source}: runs[${i}].couriers[${j}].steps missing`);
      }
    });
  });
  if (!d.heat || !Array.isArray(d.heat.times) || !Array.isArray(d.heat.values)) {
    throw new MalformedFileError(`${source}: missing heat field`);
  }
  if (d.heat.times.length !== d.heat.values.length) {
    throw new MalformedFileError(`${source}: heat.times and heat.values disagree`);
  }
  return d;
}

export function parseCurveCsv(text: string, source: string): CurveRow[] {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) throw new MalformedFileError(`${source}: empty curve file`);
  const header = lines[0].split(",").map((h) => h.trim());
  const need = ["episode", "train_score", "eval_score", "value_loss", "mean_entropy"];
  for (const col of need) {
    if (!header.includes(col)) {
      throw new MalformedFileError(`${source}: missing column ${col}`);
    }
  }
  const idx = Object.fromEntries(need.map((c) => [c, header.indexOf(c)]));
  const rows: CurveRow[] = [];
  for (let k = 1; k < lines.length; k++) {
    const parts = lines[k].split(",");
    const num = (name: string): number | null => {
      const raw = parts[idx[name]]?.trim() ?? "";
      if (raw === "") return null;
      const v = Number(raw);
      if (Number.isNaN(v)) {
        throw new MalformedFileError(`${source}: row ${k} has non-numeric ${name} (${raw})`);
      }
      return v;
    };
    const episode = num("episode");
    if (episode === null) throw new MalformedFileError(`${source}: row ${k} missing episode`);
    rows.push({
      episode,
      train_score: num("train_score"),
      eval_score: num("eval_score"),
      value_loss: num("value_loss"),
      mean_entropy: num("mean_entropy"),
    });
  }
  return rows;
}
