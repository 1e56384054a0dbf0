/**
 * Bench CSV contract: the fixed column set the Python engine writes.
 * Parsing is strict about columns (a mismatch names the offender) and lenient
 * about row order.
 */

export interface BenchRow {
  method: string;
  shots: number;
  lambda: number;
  epsilon: number | null;
  tau: number;
  block_size: number;
  gen_len: number;
  seed: number;
  tokens_generated: number;
  wall_ms: number;
  tokens_per_sec: number;
  final_example_count: number;
  refresh_count: number;
  accuracy_proxy: string;
}

export const REQUIRED_COLUMNS = [
  "method",
  "shots",
  "lambda",
  "epsilon",
  "tau",
  "block_size",
  "gen_len",
  "seed",
  "tokens_generated",
  "wall_ms",
  "tokens_per_sec",
  "final_example_count",
  "refresh_count",
  "accuracy_proxy",
] as const;

export class SchemaError extends Error {}

function splitCsvLine(line: string): string[] {
  // The engine never quotes fields, but tolerate simple quoting anyway.
  const out: string[] = [];
  let field = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"' && line[i + 1] === '"') {
        field += '"';
        i++;
      } else if (ch === '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      out.push(field);
      field = "";
    } else {
      field += ch;
    }
  }
  out.push(field);
  return out;
}

function toNumber(raw: string, column: string, lineno: number): number {
  const value = Number(raw);
  if (raw === "" || !Number.isFinite(value)) {
    throw new SchemaError(`line ${lineno}: column "${column}" is not numeric: "${raw}"`);
  }
  return value;
}

export function parseBenchCsv(text: string): BenchRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const header = splitCsvLine(lines[0]).map((h) => h.trim());
  for (const column of REQUIRED_COLUMNS) {
    if (!header.includes(column)) {
      throw new SchemaError(`missing required column "${column}"`);
    }
  }
  const idx = (name: string) => header.indexOf(name);
  const rows: BenchRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = splitCsvLine(lines[i]);
    if (cells.length < header.length) {
      throw new SchemaError(`line ${i + 1}: expected ${header.length} cells, got ${cells.length}`);
    }
    const cell = (name: string) => cells[idx(name)].trim();
    const epsRaw = cell("epsilon");
    rows.push({
      method: cell("method"),
      shots: toNumber(cell("shots"), "shots", i + 1),
      lambda: toNumber(cell("lambda"), "lambda", i + 1),
      epsilon: epsRaw === "" ? null : toNumber(epsRaw, "epsilon", i + 1),
      tau: toNumber(cell("tau"), "tau", i + 1),
      block_size: toNumber(cell("block_size"), "block_size", i + 1),
      gen_len: toNumber(cell("gen_len"), "gen_len", i + 1),
      seed: toNumber(cell("seed"), "seed", i + 1),
      tokens_generated: toNumber(cell("tokens_generated"), "tokens_generated", i + 1),
      wall_ms: toNumber(cell("wall_ms"), "wall_ms", i + 1),
      tokens_per_sec: toNumber(cell("tokens_per_sec"), "tokens_per_sec", i + 1),
      final_example_count: toNumber(cell("final_example_count"), "final_example_count", i + 1),
      refresh_count: toNumber(cell("refresh_count"), "refresh_count", i + 1),
      accuracy_proxy: cell("accuracy_proxy"),
    });
  }
  if (rows.length === 0) {
    throw new SchemaError("empty CSV: header but no data rows");
  }
  return rows;
}
