import { writeFileSync } from "fs";

import { num, readCsv, requireColumns, Table } from "./csv.js";
import { lineChart, Series } from "./svg.js";

export type FigureKind = "convergence" | "spectra" | "bounds" | "ranks";

export interface FigureSpec {
  kind: FigureKind;
  input: string;
  output: string;
  logY?: boolean; // default: log for error/sigma/bound figures, linear for ranks
}

function groupBy(table: Table, column: string): Map<string, Record<string, string>[]> {
  const groups = new Map<string, Record<string, string>[]>();
  for (const row of table.rows) {
    const key = row[column];
    if (!groups.has(key)) groups.set(key, []);
    groups.get(key)!.push(row);
  }
  return groups;
}

function sortedNumericKeys(groups: Map<string, unknown>): string[] {
  return [...groups.keys()].sort((a, b) => Number(a) - Number(b));
}

/** Worst error over the time slices, per iteration: one curve per sweep value. */
function convergenceSeries(table: Table): Series[] {
  requireColumns(table, ["sweep_value", "k", "n", "error"]);
  const out: Series[] = [];
  const groups = groupBy(table, "sweep_value");
  for (const key of sortedNumericKeys(groups)) {
    const byK = new Map<number, number>();
    for (const row of groups.get(key)!) {
      const k = num(row, "k");
      const err = num(row, "error");
      byK.set(k, Math.max(byK.get(k) ?? 0, err));
    }
    const points = [...byK.entries()].sort((a, b) => a[0] - b[0]);
    out.push({ label: `sweep=${key}`, points });
  }
  return out;
}

/** Singular values against index, one curve per snapshot time. */
function spectraSeries(table: Table): Series[] {
  requireColumns(table, ["time", "index", "sigma"]);
  const out: Series[] = [];
  const groups = groupBy(table, "time");
  for (const key of sortedNumericKeys(groups)) {
    const points = groups
      .get(key)!
      .map((row) => [num(row, "index"), num(row, "sigma")] as [number, number])
      .sort((a, b) => a[0] - b[0]);
    out.push({ label: `t=${Number(key)}`, points });
  }
  return out;
}

/** The four bound curves against iteration. */
function boundsSeries(table: Table): Series[] {
  requireColumns(table, ["kind", "n", "k", "value"]);
  const out: Series[] = [];
  for (const [key, rows] of groupBy(table, "kind")) {
    const points = rows
      .map((row) => [num(row, "k"), num(row, "value")] as [number, number])
      .sort((a, b) => a[0] - b[0]);
    out.push({ label: key, points });
  }
  return out;
}

/** Realized rank against slice, one line per iteration. */
function ranksSeries(table: Table): Series[] {
  requireColumns(table, ["k", "n", "rank"]);
  const out: Series[] = [];
  const groups = groupBy(table, "k");
  for (const key of sortedNumericKeys(groups)) {
    const points = groups
      .get(key)!
      .map((row) => [num(row, "n"), num(row, "rank")] as [number, number])
      .sort((a, b) => a[0] - b[0]);
    out.push({ label: `k=${key}`, points });
  }
  return out;
}

export function render(spec: FigureSpec): string {
  const table = readCsv(spec.input);
  let series: Series[];
  let title: string;
  let xLabel: string;
  let yLabel: string;
  let logY: boolean;
  switch (spec.kind) {
    case "convergence":
      series = convergenceSeries(table);
      [title, xLabel, yLabel, logY] = ["Convergence", "iteration k", "max error", true];
      break;
    case "spectra":
      series = spectraSeries(table);
      [title, xLabel, yLabel, logY] = ["Singular values", "index", "sigma", true];
      break;
    case "bounds":
      series = boundsSeries(table);
      [title, xLabel, yLabel, logY] = ["Error bounds", "iteration k", "bound", true];
      break;
    case "ranks":
      series = ranksSeries(table);
      [title, xLabel, yLabel, logY] = ["Rank over time", "slice n", "rank", false];
      break;
    default:
      throw new Error(`unknown figure kind '${spec.kind as string}'`);
  }
  const svg = lineChart(series, { title, xLabel, yLabel, logY: spec.logY ?? logY });
  writeFileSync(spec.output, svg);
  return spec.output;
}
