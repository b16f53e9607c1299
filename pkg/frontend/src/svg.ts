/** Minimal SVG line-chart emitter: one panel, labeled curves, log or linear y. */

export interface Series {
  label: string;
  points: [number, number][];
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  logY: boolean;
  width?: number;
  height?: number;
}

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const MARGIN = { top: 36, right: 150, bottom: 44, left: 64 };

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function ticks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const step = (hi - lo) / (n - 1);
  return Array.from({ length: n }, (_, i) => lo + i * step);
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  const start = Math.ceil(lo);
  const stride = Math.max(1, Math.round((hi - lo) / 6));
  for (let d = start; d <= hi; d += stride) out.push(d);
  if (out.length === 0) out.push(Math.floor(lo));
  return out;
}

function fmtTick(v: number, log: boolean): string {
  if (log) return `1e${v}`;
  if (Number.isInteger(v)) return String(v);
  return v.toPrecision(3);
}

export function lineChart(series: Series[], opts: ChartOptions): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  // transform y values; drop non-positive points on a log axis
  const cleaned: Series[] = series.map((s) => ({
    label: s.label,
    points: s.points
      .filter(([, y]) => Number.isFinite(y) && (!opts.logY || y > 0))
      .map(([x, y]) => [x, opts.logY ? Math.log10(y) : y] as [number, number]),
  }));
  const all = cleaned.flatMap((s) => s.points);
  if (all.length === 0) throw new Error("nothing to plot (no finite points)");
  let [xmin, xmax] = [Math.min(...all.map((p) => p[0])), Math.max(...all.map((p) => p[0]))];
  let [ymin, ymax] = [Math.min(...all.map((p) => p[1])), Math.max(...all.map((p) => p[1]))];
  if (xmax === xmin) [xmin, xmax] = [xmin - 0.5, xmax + 0.5];
  if (ymax === ymin) [ymin, ymax] = [ymin - 0.5, ymax + 0.5];

  const sx = (x: number) => MARGIN.left + ((x - xmin) / (xmax - xmin)) * plotW;
  const sy = (y: number) => MARGIN.top + plotH - ((y - ymin) / (ymax - ymin)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="20" text-anchor="middle" font-size="14">` +
      `${escapeXml(opts.title)}</text>`,
  );

  // axes
  const axisColor = "#333";
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" x2="${MARGIN.left + plotW}" ` +
      `y2="${MARGIN.top + plotH}" stroke="${axisColor}"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" ` +
      `y2="${MARGIN.top + plotH}" stroke="${axisColor}"/>`,
  );
  for (const t of ticks(xmin, xmax)) {
    const x = sx(t);
    parts.push(
      `<line x1="${x}" y1="${MARGIN.top + plotH}" x2="${x}" y2="${MARGIN.top + plotH + 4}" stroke="${axisColor}"/>`,
      `<text x="${x}" y="${MARGIN.top + plotH + 18}" text-anchor="middle">${fmtTick(t, false)}</text>`,
    );
  }
  const yTicks = opts.logY ? logTicks(ymin, ymax) : ticks(ymin, ymax);
  for (const t of yTicks) {
    const y = sy(t);
    parts.push(
      `<line x1="${MARGIN.left - 4}" y1="${y}" x2="${MARGIN.left}" y2="${y}" stroke="${axisColor}"/>`,
      `<text x="${MARGIN.left - 8}" y="${y + 4}" text-anchor="end">${fmtTick(t, opts.logY)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 8}" text-anchor="middle">` +
      `${escapeXml(opts.xLabel)}</text>`,
    `<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${escapeXml(opts.yLabel)}</text>`,
  );

  // curves and legend
  cleaned.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.points.map(([x, y]) => `${sx(x).toFixed(2)},${sy(y).toFixed(2)}`).join(" ");
    parts.push(
      `<polyline class="curve" data-label="${escapeXml(s.label)}" points="${pts}" ` +
        `fill="none" stroke="${color}" stroke-width="1.6"/>`,
    );
    const ly = MARGIN.top + 14 + i * 18;
    const lx = MARGIN.left + plotW + 10;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 18}" y2="${ly - 4}" stroke="${color}" stroke-width="1.6"/>`,
      `<text class="legend" x="${lx + 24}" y="${ly}">${escapeXml(s.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}
