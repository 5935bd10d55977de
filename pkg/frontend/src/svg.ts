/** Minimal SVG plotting: linear axes, polylines, scatter points, legends. */

export interface PanelSpec {
  width?: number;
  height?: number;
  title?: string;
  xLabel?: string;
  yLabel?: string;
  xLog?: boolean;
  yLog?: boolean;
}

interface Series {
  kind: "line" | "points";
  xs: number[];
  ys: number[];
  color: string;
  width?: number;
  dash?: string;
  label?: string;
  radius?: number;
}

const MARGIN = { left: 58, right: 16, top: 30, bottom: 44 };

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
  const step = candidates.find((c) => span / c <= count + 1) ?? candidates[candidates.length - 1];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) ticks.push(v);
  return ticks;
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 10000 || a < 0.001) return v.toExponential(0);
  return String(Math.round(v * 1e6) / 1e6);
}

export class Panel {
  private series: Series[] = [];
  private spec: Required<Pick<PanelSpec, "width" | "height">> & PanelSpec;

  constructor(spec: PanelSpec = {}) {
    this.spec = { width: 480, height: 360, ...spec };
  }

  line(xs: number[], ys: number[], color: string, opts: { width?: number; dash?: string; label?: string } = {}): this {
    this.series.push({ kind: "line", xs, ys, color, ...opts });
    return this;
  }

  points(xs: number[], ys: number[], color: string, opts: { radius?: number; label?: string } = {}): this {
    this.series.push({ kind: "points", xs, ys, color, ...opts });
    return this;
  }

  private transform(values: number[], log: boolean | undefined): number[] {
    return log ? values.map((v) => Math.log10(v)) : values;
  }

  /** Inner SVG fragment positioned at (x0, y0). */
  render(x0 = 0, y0 = 0): string {
    const { width, height } = this.spec;
    const xsAll = this.series.flatMap((s) => this.transform(s.xs, this.spec.xLog));
    const ysAll = this.series.flatMap((s) => this.transform(s.ys, this.spec.yLog)).filter((v) => isFinite(v));
    let xLo = Math.min(...xsAll);
    let xHi = Math.max(...xsAll);
    let yLo = ysAll.length ? Math.min(...ysAll) : 0;
    let yHi = ysAll.length ? Math.max(...ysAll) : 1;
    if (!(xHi > xLo)) {
      xLo -= 0.5;
      xHi += 0.5;
    }
    if (!(yHi > yLo)) {
      yLo -= 0.5;
      yHi += 0.5;
    }
    const padY = 0.06 * (yHi - yLo);
    yLo -= padY;
    yHi += padY;
    const plotW = width - MARGIN.left - MARGIN.right;
    const plotH = height - MARGIN.top - MARGIN.bottom;
    const px = (v: number) => MARGIN.left + ((v - xLo) / (xHi - xLo)) * plotW;
    const py = (v: number) => MARGIN.top + plotH - ((v - yLo) / (yHi - yLo)) * plotH;

    const parts: string[] = [];
    parts.push(`<g transform="translate(${x0},${y0})" font-family="Helvetica, Arial, sans-serif" font-size="11">`);
    parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="white" stroke="#444"/>`);

    for (const t of niceTicks(xLo, xHi)) {
      const x = px(t);
      parts.push(`<line x1="${x}" y1="${MARGIN.top + plotH}" x2="${x}" y2="${MARGIN.top + plotH + 4}" stroke="#444"/>`);
      const label = this.spec.xLog ? `1e${fmtTick(t)}` : fmtTick(t);
      parts.push(`<text x="${x}" y="${MARGIN.top + plotH + 16}" text-anchor="middle">${label}</text>`);
    }
    for (const t of niceTicks(yLo, yHi)) {
      const y = py(t);
      parts.push(`<line x1="${MARGIN.left - 4}" y1="${y}" x2="${MARGIN.left}" y2="${y}" stroke="#444"/>`);
      const label = this.spec.yLog ? `1e${fmtTick(t)}` : fmtTick(t);
      parts.push(`<text x="${MARGIN.left - 7}" y="${y + 3}" text-anchor="end">${label}</text>`);
    }

    for (const s of this.series) {
      const xs = this.transform(s.xs, this.spec.xLog).map(px);
      const ys = this.transform(s.ys, this.spec.yLog).map(py);
      if (s.kind === "line") {
        const pts = xs.map((x, i) => `${x.toFixed(2)},${ys[i].toFixed(2)}`).join(" ");
        const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
        parts.push(`<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="${s.width ?? 1.4}"${dash}/>`);
      } else {
        for (let i = 0; i < xs.length; i++) {
          parts.push(`<circle cx="${xs[i].toFixed(2)}" cy="${ys[i].toFixed(2)}" r="${s.radius ?? 2.2}" fill="${s.color}"/>`);
        }
      }
    }

    if (this.spec.title) {
      parts.push(`<text x="${MARGIN.left + plotW / 2}" y="${MARGIN.top - 10}" text-anchor="middle" font-size="13">${this.spec.title}</text>`);
    }
    if (this.spec.xLabel) {
      parts.push(`<text x="${MARGIN.left + plotW / 2}" y="${height - 8}" text-anchor="middle">${this.spec.xLabel}</text>`);
    }
    if (this.spec.yLabel) {
      const x = 14;
      const y = MARGIN.top + plotH / 2;
      parts.push(`<text x="${x}" y="${y}" text-anchor="middle" transform="rotate(-90 ${x} ${y})">${this.spec.yLabel}</text>`);
    }
    const labeled = this.series.filter((s) => s.label);
    labeled.forEach((s, i) => {
      const lx = MARGIN.left + 10;
      const ly = MARGIN.top + 14 + 14 * i;
      parts.push(`<line x1="${lx}" y1="${ly - 3}" x2="${lx + 18}" y2="${ly - 3}" stroke="${s.color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`);
      parts.push(`<text x="${lx + 23}" y="${ly}">${s.label}</text>`);
    });
    parts.push("</g>");
    return parts.join("\n");
  }

  get width(): number {
    return this.spec.width;
  }

  get height(): number {
    return this.spec.height;
  }
}

export function figure(panels: Panel[], columns = panels.length): string {
  const cols = Math.max(1, Math.min(columns, panels.length));
  const rows = Math.ceil(panels.length / cols);
  const cellW = Math.max(...panels.map((p) => p.width));
  const cellH = Math.max(...panels.map((p) => p.height));
  const width = cols * cellW;
  const height = rows * cellH;
  const body = panels
    .map((p, i) => p.render((i % cols) * cellW, Math.floor(i / cols) * cellH))
    .join("\n");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n${body}\n</svg>\n`
  );
}
