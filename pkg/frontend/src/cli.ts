#!/usr/bin/env node
/**
 * courierlab-plots: render SVG figures from courierlab export files.
 *
 *   courierlab-plots trajectories <trajectories.json> <out.svg> [--time M] [--columns N]
 *   courierlab-plots curve <label=curve.csv> [<label=curve.csv> ...] <out.svg>
 *       [--column eval_score|train_score|value_loss|mean_entropy] [--smooth K]
 */

import * as fs from "fs";
import { parseCurveCsv, parseTrajectoryDoc } from "./types.js";
import { renderTrajectories } from "./trajectories.js";
import { CurveSeries, renderCurves } from "./curves.js";

function fail(message: string): never {
  console.error(message);
  process.exit(1);
}

function parseFlags(args: string[]): { positional: string[]; flags: Record<string, string> } {
  const positional: string[] = [];
  const flags: Record<string, string> = {};
  for (let i = 0; i < args.length; i++) {
    if (args[i].startsWith("--")) {
      flags[args[i].slice(2)] = args[i + 1] ?? "";
      i++;
    } else {
      positional.push(args[i]);
    }
  }
  return { positional, flags };
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (!command) fail("usage: courierlab-plots <trajectories|curve> ...");
  const { positional, flags } = parseFlags(rest);

  if (command === "trajectories") {
    if (positional.length !== 2) {
      fail("usage: courierlab-plots trajectories <trajectories.json> <out.svg> [--time M]");
    }
    const [input, output] = positional;
    const doc = parseTrajectoryDoc(fs.readFileSync(input, "utf8"), input);
    const svg = renderTrajectories(doc, {
      untilMinute: flags.time !== undefined ? Number(flags.time) : undefined,
      columns: flags.columns !== undefined ? Number(flags.columns) : undefined,
    });
    fs.writeFileSync(output, svg);
    console.log(`wrote ${output} (${svg.length} bytes, ${doc.runs.length} panels)`);
    return 0;
  }

  if (command === "curve") {
    if (positional.length < 2) {
      fail("usage: courierlab-plots curve <label=curve.csv> ... <out.svg>");
    }
    const output = positional[positional.length - 1];
    const series: CurveSeries[] = positional.slice(0, -1).map((spec) => {
      const eq = spec.indexOf("=");
      const label = eq > 0 ? spec.slice(0, eq) : spec;
      const path = eq > 0 ? spec.slice(eq + 1) : spec;
      return { label, rows: parseCurveCsv(fs.readFileSync(path, "utf8"), path) };
    });
    const svg = renderCurves(series, {
      column: (flags.column as never) ?? undefined,
      smooth: flags.smooth !== undefined ? Number(flags.smooth) : undefined,
    });
    fs.writeFileSync(output, svg);
    console.log(`wrote ${output} (${svg.length} bytes, ${series.length} lines)`);
    return 0;
  }

  fail(`unknown command ${command}`);
}

main(process.argv.slice(2));
