/** Figure renderer CLI.
 *
 *   node dist/main.js all <experiment_dir> <out_dir>
 *   node dist/main.js drift <drift_table.csv> <out.svg>
 *   node dist/main.js transient <out.svg> <transient_*.csv ...>
 *   node dist/main.js mixed <mixed_comparison.csv> <out.svg>
 *   node dist/main.js scaling <scaling.csv> <scaling_fits.csv> <out.svg>
 *   node dist/main.js stationary <stationary_qq.csv> <stationary_acf.csv|-> <out.svg>
 *
 * Inputs are read-only: every consumed CSV is checksummed before and after
 * rendering and any mutation aborts with a nonzero exit.
 */

import { createHash } from "crypto";
import { mkdirSync, readFileSync, writeFileSync } from "fs";
import { join } from "path";

import { CsvError } from "./csv.js";
import { FigureError, renderAll, renderDrift, renderMixed, renderScaling, renderStationary, renderTransient } from "./figures.js";

function sha256(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

class ChecksumGuard {
  private sums = new Map<string, string>();

  watch(paths: string[]): void {
    for (const p of paths) this.sums.set(p, sha256(p));
  }

  verify(): void {
    for (const [p, before] of this.sums) {
      if (sha256(p) !== before) throw new Error(`input csv was mutated during rendering: ${p}`);
    }
  }
}

function run(argv: string[]): number {
  const [kind, ...rest] = argv;
  const guard = new ChecksumGuard();
  try {
    if (kind === "all") {
      const [dir, outDir] = rest;
      if (!dir || !outDir) throw new FigureError("usage: all <experiment_dir> <out_dir>");
      mkdirSync(outDir, { recursive: true });
      const figures = renderAll(dir);
      guard.watch(figures.flatMap((f) => f.inputs));
      for (const fig of figures) {
        const path = join(outDir, `${fig.kind}.svg`);
        writeFileSync(path, fig.svg);
        console.log(`wrote ${path}`);
      }
      if (figures.length === 0) console.log("no renderable csvs found");
    } else if (kind === "drift") {
      const [csv, out] = rest;
      guard.watch([csv]);
      writeFileSync(out, renderDrift(csv));
      console.log(`wrote ${out}`);
    } else if (kind === "transient") {
      const [out, ...csvs] = rest;
      guard.watch(csvs);
      writeFileSync(out, renderTransient(csvs));
      console.log(`wrote ${out}`);
    } else if (kind === "mixed") {
      const [csv, out] = rest;
      guard.watch([csv]);
      writeFileSync(out, renderMixed(csv));
      console.log(`wrote ${out}`);
    } else if (kind === "scaling") {
      const [csv, fits, out] = rest;
      guard.watch([csv, fits]);
      writeFileSync(out, renderScaling(csv, fits));
      console.log(`wrote ${out}`);
    } else if (kind === "stationary") {
      const [qq, acf, out] = rest;
      const acfPath = acf === "-" ? null : acf;
      guard.watch(acfPath ? [qq, acfPath] : [qq]);
      writeFileSync(out, renderStationary(qq, acfPath));
      console.log(`wrote ${out}`);
    } else {
      console.error("unknown figure kind; use: all | drift | transient | mixed | scaling | stationary");
      return 2;
    }
    guard.verify();
    return 0;
  } catch (err) {
    if (err instanceof CsvError || err instanceof FigureError) {
      console.error(`figure error: ${err.message}`);
      return 2;
    }
    if (err instanceof Error && "code" in err && (err as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`missing file: ${(err as NodeJS.ErrnoException).path}`);
      return 2;
    }
    throw err;
  }
}

process.exit(run(process.argv.slice(2)));
