/** The five figure kinds, one renderer per experiment CSV schema.
 *
 * Color convention: canonical black, vanilla sub-sampling red, control
 * variates blue; simulated paths black with their theoretical limit in red.
 */

import { existsSync, readdirSync } from "fs";
import { basename, join } from "path";

import { column, readCsv, requireColumns, textColumn, Table } from "./csv.js";
import { figure, Panel } from "./svg.js";

export const COLORS = {
  canonical: "#000000",
  ss: "#cc2222",
  cv: "#2244cc",
  mixed: "#000000",
  theory: "#cc2222",
};

export class FigureError extends Error {}

export function renderDrift(csvPath: string): string {
  const table = readCsv(csvPath);
  requireColumns(table, ["x", "b_can", "b_ss", "b_cv"]);
  const x = column(table, "x");
  const panel = new Panel({ title: "Asymptotic drift", xLabel: "x", yLabel: "b(x)", width: 560, height: 400 })
    .line(x, column(table, "b_can"), COLORS.canonical, { label: "canonical" })
    .line(x, column(table, "b_ss"), COLORS.ss, { label: "sub-sampling" })
    .line(x, column(table, "b_cv"), COLORS.cv, { label: "control variates" });
  return figure([panel]);
}

export function renderTransient(csvPaths: string[]): string {
  if (csvPaths.length === 0) throw new FigureError("no transient csv given");
  const panels = csvPaths.map((path) => {
    const table = readCsv(path);
    requireColumns(table, ["t"]);
    const t = column(table, "t");
    const simCols = table.header.filter((h) => h.startsWith("x_sim"));
    const odeCols = table.header.filter((h) => h.startsWith("x_ode"));
    if (simCols.length === 0 || odeCols.length !== simCols.length) {
      throw new FigureError(`expected matching x_sim*/x_ode* columns in ${path}`);
    }
    const name = basename(path).replace(/^transient_/, "").replace(/\.csv$/, "");
    const panel = new Panel({ title: name, xLabel: "t", yLabel: "x(t)", width: 460, height: 340 });
    simCols.forEach((c, i) =>
      panel.line(t, column(table, c), COLORS.canonical, { label: i === 0 ? "sampler" : undefined })
    );
    odeCols.forEach((c, i) =>
      panel.line(t, column(table, c), COLORS.theory, { width: 2, label: i === 0 ? "fluid limit" : undefined })
    );
    return panel;
  });
  return figure(panels, Math.min(3, panels.length));
}

export function renderMixed(csvPath: string): string {
  const table = readCsv(csvPath);
  requireColumns(table, ["t", "x_ss", "x_cv", "x_mixed"]);
  const t = column(table, "t");
  const panel = new Panel({
    title: "Sub-sampling schemes from the tail",
    xLabel: "t",
    yLabel: "x(t)",
    width: 560,
    height: 400,
  })
    .line(t, column(table, "x_ss"), COLORS.ss, { label: "sub-sampling" })
    .line(t, column(table, "x_cv"), COLORS.cv, { label: "control variates" })
    .line(t, column(table, "x_mixed"), COLORS.mixed, { width: 2, label: "mixed" });
  return figure([panel]);
}

export function renderScaling(csvPath: string, fitsPath: string): string {
  const table = readCsv(csvPath);
  requireColumns(table, ["scheme", "n", "accepted_per_unit_time", "iact_x1", "grad_evals_per_proposal"]);
  const fits = readCsv(fitsPath);
  requireColumns(fits, ["scheme", "quantity", "slope", "stderr", "r2"]);
  const schemes = [...new Set(textColumn(table, "scheme"))];
  const color = (s: string) => (s.startsWith("ss") ? COLORS.ss : s === "cv" ? COLORS.cv : COLORS.canonical);

  const quantities: Array<[string, string]> = [
    ["accepted_per_unit_time", "accepted switches per unit time"],
    ["iact_x1", "autocorrelation time"],
    ["grad_evals_per_proposal", "gradient terms per proposal"],
  ];
  const panels = quantities.map(([q, label]) => {
    const panel = new Panel({ title: label, xLabel: "log10 n", yLabel: "log10 value", xLog: true, yLog: true, width: 440, height: 340 });
    for (const s of schemes) {
      const mask = textColumn(table, "scheme").map((v) => v === s);
      const ns = column(table, "n").filter((_, i) => mask[i]);
      const vals = column(table, q).filter((_, i) => mask[i]);
      panel.points(ns, vals, color(s));
      const fit = fits.rows.find((r) => r[fits.header.indexOf("scheme")] === s && r[fits.header.indexOf("quantity")] === q);
      if (fit) {
        const slope = Number(fit[fits.header.indexOf("slope")]);
        // anchor the fitted line at the first grid point
        const lineVals = ns.map((n) => vals[0] * Math.pow(n / ns[0], slope));
        panel.line(ns, lineVals, color(s), { dash: "4 3", label: `${s} (slope ${slope.toFixed(2)})` });
      }
    }
    return panel;
  });
  return figure(panels, 3);
}

export function renderStationary(qqPath: string, acfPath: string | null): string {
  const qq = readCsv(qqPath);
  requireColumns(qq, ["scheme", "theoretical", "empirical"]);
  const schemes = [...new Set(textColumn(qq, "scheme"))];
  const color = (s: string) => (s.startsWith("ss") ? COLORS.ss : s === "cv" ? COLORS.cv : COLORS.canonical);
  const qqPanel = new Panel({
    title: "Rescaled posterior samples vs limiting Gaussian",
    xLabel: "theoretical quantile",
    yLabel: "empirical quantile",
    width: 460,
    height: 380,
  });
  const theoAll = column(qq, "theoretical").filter((v) => isFinite(v));
  const lo = Math.min(...theoAll);
  const hi = Math.max(...theoAll);
  qqPanel.line([lo, hi], [lo, hi], "#999999", { dash: "3 3" });
  for (const s of schemes) {
    const mask = textColumn(qq, "scheme").map((v) => v === s);
    const theo = column(qq, "theoretical").filter((_, i) => mask[i] && isFinite(theoAll[i]));
    const emp = column(qq, "empirical").filter((_, i) => mask[i] && isFinite(theoAll[i]));
    qqPanel.points(theo, emp, color(s), { label: s });
  }
  const panels = [qqPanel];
  if (acfPath !== null) {
    const acf = readCsv(acfPath);
    requireColumns(acf, ["scheme", "lag", "empirical", "theory"]);
    const acfPanel = new Panel({
      title: "Autocorrelation of the rescaled process",
      xLabel: "lag (time units)",
      yLabel: "autocorrelation",
      width: 460,
      height: 380,
    });
    const lags = column(acf, "lag");
    acfPanel.line(lags, column(acf, "theory"), COLORS.theory, { width: 2, label: "diffusion limit" });
    acfPanel.points(lags, column(acf, "empirical"), COLORS.canonical, { radius: 3, label: "sampler" });
    panels.push(acfPanel);
  }
  return figure(panels, 2);
}

export interface RenderedFigure {
  kind: string;
  svg: string;
  inputs: string[];
}

/** Render every figure whose inputs exist inside an experiment directory. */
export function renderAll(dir: string): RenderedFigure[] {
  const out: RenderedFigure[] = [];
  const drift = join(dir, "drift_table.csv");
  if (existsSync(drift)) out.push({ kind: "drift", svg: renderDrift(drift), inputs: [drift] });
  const transientCsvs = readdirSync(dir)
    .filter((f) => f.startsWith("transient_") && f.endsWith(".csv") && f !== "transient_summary.csv")
    .map((f) => join(dir, f))
    .sort();
  if (transientCsvs.length > 0) {
    out.push({ kind: "transient", svg: renderTransient(transientCsvs), inputs: transientCsvs });
  }
  const mixed = join(dir, "mixed_comparison.csv");
  if (existsSync(mixed)) out.push({ kind: "mixed", svg: renderMixed(mixed), inputs: [mixed] });
  const scaling = join(dir, "scaling.csv");
  const fits = join(dir, "scaling_fits.csv");
  if (existsSync(scaling) && existsSync(fits)) {
    out.push({ kind: "scaling", svg: renderScaling(scaling, fits), inputs: [scaling, fits] });
  }
  const qq = join(dir, "stationary_qq.csv");
  if (existsSync(qq)) {
    const acf = join(dir, "stationary_acf.csv");
    const acfPath = existsSync(acf) ? acf : null;
    out.push({
      kind: "stationary",
      svg: renderStationary(qq, acfPath),
      inputs: acfPath ? [qq, acfPath] : [qq],
    });
  }
  return out;
}
