import * as fs from "fs";
import * as path from "path";
import { describe, expect, it } from "vitest";
import { parseCurveCsv, MalformedFileError } from "../src/types.js";
import { renderCurves } from "../src/curves.js";

const plain = path.join(__dirname, "fixtures", "curve_plain.csv");
const imitation = path.join(__dirname, "fixtures", "curve_imitation.csv");

function rows(file: string) {
  return parseCurveCsv(fs.readFileSync(file, "utf8"), file);
}

describe("learning curves", () => {
  it("parses the exported csv", () => {
    const r = rows(plain);
    expect(r.length).toBeGreaterThan(0);
    expect(r[0].episode).toBe(0);
    expect(r[0].eval_score).toBeNull(); // eval only runs periodically
    expect(r.some((row) => row.eval_score !== null)).toBe(true);
  });

  it("overlays two labeled runs", () => {
    const svg = renderCurves([
      { label: "plain", rows: rows(plain) },
      { label: "imitation", rows: rows(imitation) },
    ]);
    expect(svg).toContain("<svg");
    expect(svg).toContain("plain");
    expect(svg).toContain("imitation");
    expect((svg.match(/<polyline /g) ?? []).length).toBe(2);
    expect(svg.length).toBeGreaterThan(1000);
  });

  it("single run draws a single line", () => {
    const svg = renderCurves([{ label: "only", rows: rows(plain) }], {
      column: "train_score",
    });
    expect((svg.match(/<polyline /g) ?? []).length).toBe(1);
  });

  it("constant series stays horizontal", () => {
    const constant = Array.from({ length: 5 }, (_, k) => ({
      episode: k,
      train_score: 0.5,
      eval_score: 0.5,
      value_loss: 1.0,
      mean_entropy: 2.0,
    }));
    const svg = renderCurves([{ label: "flat", rows: constant }]);
    const match = svg.match(/<polyline points="([^"]+)"/);
    expect(match).not.toBeNull();
    const ys = match![1].split(" ").map((p) => Number(p.split(",")[1]));
    expect(new Set(ys).size).toBe(1);
  });

  it("reports missing columns", () => {
    expect(() => parseCurveCsv("episode,train_score\n0,1\n", "x.csv")).toThrow(
      MalformedFileError
    );
    expect(() => parseCurveCsv("episode,train_score\n0,1\n", "x.csv")).toThrow(
      /eval_score/
    );
  });
});
