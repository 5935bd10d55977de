import { execFileSync } from "child_process";
import { createHash } from "crypto";
import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { column, parseCsv, requireColumns, CsvError } from "../src/csv.js";
import { figure, Panel } from "../src/svg.js";
import {
  renderAll,
  renderDrift,
  renderMixed,
  renderScaling,
  renderStationary,
  renderTransient,
  FigureError,
} from "../src/figures.js";

const FIXTURES = join(__dirname, "fixtures");

function sha256(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

describe("csv parsing", () => {
  it("round-trips a small table", () => {
    const t = parseCsv("a,b\n1,2\n3,4\n");
    expect(t.header).toEqual(["a", "b"]);
    expect(column(t, "b")).toEqual([2, 4]);
  });

  it("rejects ragged rows", () => {
    expect(() => parseCsv("a,b\n1\n")).toThrow(CsvError);
  });

  it("reports missing columns by name", () => {
    const t = parseCsv("a,b\n1,2\n");
    expect(() => requireColumns(t, ["a", "zz"])).toThrow(/missing column 'zz'/);
  });

  it("handles an empty-but-valid table", () => {
    const t = parseCsv("x,y\n");
    expect(t.rows).toEqual([]);
    expect(column(t, "x")).toEqual([]);
  });
});

describe("svg panels", () => {
  it("produces a well-formed svg document", () => {
    const p = new Panel({ title: "t", xLabel: "x", yLabel: "y" }).line([0, 1], [0, 1], "#000");
    const svg = figure([p]);
    expect(svg).toMatch(/^<svg xmlns/);
    expect(svg).toContain("</svg>");
    expect(svg).toContain("polyline");
  });

  it("renders empty series without crashing", () => {
    const p = new Panel({}).line([], [], "#000");
    expect(figure([p])).toContain("<svg");
  });
});

describe("figure renderers", () => {
  it("drift figure uses the scheme color convention", () => {
    const svg = renderDrift(join(FIXTURES, "drift_table.csv"));
    expect(svg).toContain("#000000"); // canonical black
    expect(svg).toContain("#cc2222"); // sub-sampling red
    expect(svg).toContain("#2244cc"); // control variates blue
  });

  it("transient overlays sampler (black) and limit (red)", () => {
    const svg = renderTransient([
      join(FIXTURES, "transient_canonical.csv"),
      join(FIXTURES, "transient_ss.csv"),
    ]);
    expect(svg).toContain("sampler");
    expect(svg).toContain("fluid limit");
  });

  it("mixed comparison renders three trajectories", () => {
    const svg = renderMixed(join(FIXTURES, "mixed_comparison.csv"));
    expect(svg).toContain("mixed");
    expect((svg.match(/polyline/g) ?? []).length).toBeGreaterThanOrEqual(3);
  });

  it("scaling figure draws fitted slope lines", () => {
    const svg = renderScaling(join(FIXTURES, "scaling.csv"), join(FIXTURES, "scaling_fits.csv"));
    expect(svg).toContain("slope");
  });

  it("stationary figure renders qq and acf panels", () => {
    const svg = renderStationary(
      join(FIXTURES, "stationary_qq.csv"),
      join(FIXTURES, "stationary_acf.csv")
    );
    expect(svg).toContain("quantile");
    expect(svg).toContain("diffusion limit");
  });

  it("missing columns raise a figure/csv error", () => {
    const dir = mkdtempSync(join(tmpdir(), "zzfig-"));
    const bad = join(dir, "drift_table.csv");
    writeFileSync(bad, "x,b_can\n0,1\n");
    expect(() => renderDrift(bad)).toThrow(/missing column 'b_ss'/);
  });

  it("renderAll discovers every figure kind in the fixture directory", () => {
    const figures = renderAll(FIXTURES);
    const kinds = figures.map((f) => f.kind).sort();
    expect(kinds).toEqual(["drift", "mixed", "scaling", "stationary", "transient"]);
  });
});

describe("cli end to end", () => {
  const node = process.execPath;
  const cli = join(__dirname, "..", "dist", "main.js");

  it("renders all five figure kinds with exit 0 and mutates no csv", () => {
    const before = new Map(
      readdirSync(FIXTURES)
        .filter((f) => f.endsWith(".csv"))
        .map((f) => [f, sha256(join(FIXTURES, f))])
    );
    const outDir = mkdtempSync(join(tmpdir(), "zzfig-out-"));
    const stdout = execFileSync(node, [cli, "all", FIXTURES, outDir], { encoding: "utf8" });
    expect(stdout).toContain("wrote");
    const produced = readdirSync(outDir).sort();
    expect(produced).toEqual(["drift.svg", "mixed.svg", "scaling.svg", "stationary.svg", "transient.svg"]);
    for (const f of produced) {
      expect(readFileSync(join(outDir, f), "utf8")).toMatch(/^<svg/);
    }
    for (const [f, sum] of before) {
      expect(sha256(join(FIXTURES, f))).toBe(sum);
    }
  });

  it("exits nonzero on a missing input file", () => {
    const outDir = mkdtempSync(join(tmpdir(), "zzfig-out-"));
    expect(() =>
      execFileSync(node, [cli, "drift", join(FIXTURES, "nope.csv"), join(outDir, "o.svg")], {
        encoding: "utf8",
      })
    ).toThrow();
  });

  it("exits nonzero on a csv missing required columns", () => {
    const dir = mkdtempSync(join(tmpdir(), "zzfig-bad-"));
    writeFileSync(join(dir, "bad.csv"), "t,x_ss\n0,1\n");
    const outDir = mkdtempSync(join(tmpdir(), "zzfig-out-"));
    let code = 0;
    try {
      execFileSync(node, [cli, "mixed", join(dir, "bad.csv"), join(outDir, "o.svg")], { encoding: "utf8" });
    } catch (err) {
      code = (err as { status: number }).status;
    }
    expect(code).toBe(2);
  });

  it("empty-but-valid csv renders empty axes with exit 0", () => {
    const dir = mkdtempSync(join(tmpdir(), "zzfig-empty-"));
    const csv = join(dir, "drift_table.csv");
    writeFileSync(csv, "x,b_can,b_ss,b_cv\n");
    const out = join(dir, "o.svg");
    execFileSync(node, [cli, "drift", csv, out], { encoding: "utf8" });
    expect(readFileSync(out, "utf8")).toContain("<svg");
  });
});
