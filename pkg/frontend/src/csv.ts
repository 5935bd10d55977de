import { readFileSync } from "fs";

export class CsvError extends Error {}

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new CsvError("empty csv");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new CsvError(`row width ${row.length} does not match header width ${header.length}`);
    }
  }
  return { header, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf8"));
}

/** Numeric column by name; throws when the column is missing. */
export function column(table: Table, name: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) throw new CsvError(`missing column '${name}' (have: ${table.header.join(", ")})`);
  return table.rows.map((r) => Number(r[idx]));
}

/** String column by name; throws when the column is missing. */
export function textColumn(table: Table, name: string): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) throw new CsvError(`missing column '${name}' (have: ${table.header.join(", ")})`);
  return table.rows.map((r) => r[idx]);
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.header.includes(name)) {
      throw new CsvError(`missing column '${name}' (have: ${table.header.join(", ")})`);
    }
  }
}
