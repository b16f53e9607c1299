import { readFileSync } from "fs";

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

/** Parse a plain comma-separated file with a header row (no quoting). */
export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error("empty CSV");
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== columns.length) {
      throw new Error(`row ${i + 2}: expected ${columns.length} cells, got ${cells.length}`);
    }
    const row: Record<string, string> = {};
    columns.forEach((c, j) => (row[c] = cells[j].trim()));
    return row;
  });
  return { columns, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf8"));
}

/** Assert the table carries every column a figure kind needs. */
export function requireColumns(table: Table, needed: string[]): void {
  for (const c of needed) {
    if (!table.columns.includes(c)) {
      throw new Error(`missing column '${c}' (found: ${table.columns.join(", ")})`);
    }
  }
}

export function num(row: Record<string, string>, column: string): number {
  const v = Number(row[column]);
  if (!Number.isFinite(v) && row[column] !== "inf" && row[column] !== "nan") {
    if (Number.isNaN(v)) throw new Error(`column '${column}': cannot parse '${row[column]}'`);
  }
  return v;
}
