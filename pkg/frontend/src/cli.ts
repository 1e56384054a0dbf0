#!/usr/bin/env node
/**
 * Render a bench CSV to an SVG figure.
 *
 *   deskdlm-figures --in sweep.csv --out sweep.svg --kind shots_sweep
 */
import { readFileSync, writeFileSync } from "node:fs";
import process from "node:process";

import { FIGURE_KINDS, FigureError, FigureKind, renderFigure } from "./figures.js";
import { SchemaError, parseBenchCsv } from "./schema.js";

const USAGE = `usage: deskdlm-figures --in <bench.csv> --out <figure.svg> --kind <${FIGURE_KINDS.join("|")}>`;

interface Args {
  input: string;
  output: string;
  kind: FigureKind;
}

export function parseArgs(argv: string[]): Args {
  let input: string | undefined;
  let output: string | undefined;
  let kind: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--in") input = argv[++i];
    else if (arg === "--out") output = argv[++i];
    else if (arg === "--kind") kind = argv[++i];
    else if (arg === "--help" || arg === "-h") {
      console.log(USAGE);
      process.exit(0);
    } else throw new Error(`unknown argument: ${arg}\n${USAGE}`);
  }
  if (!input || !output || !kind) {
    throw new Error(`--in, --out and --kind are all required\n${USAGE}`);
  }
  if (!(FIGURE_KINDS as readonly string[]).includes(kind)) {
    throw new Error(`unknown figure kind "${kind}" (expected ${FIGURE_KINDS.join(", ")})`);
  }
  return { input, output, kind: kind as FigureKind };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
  try {
    const rows = parseBenchCsv(readFileSync(args.input, "utf-8"));
    const { svg, warnings } = renderFigure(args.kind, rows);
    for (const w of warnings) console.error(`warning: ${w}`);
    writeFileSync(args.output, svg, "utf-8");
    console.error(`wrote ${args.kind} figure (${rows.length} rows) to ${args.output}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 2;
    }
    if (err instanceof FigureError) {
      console.error(`figure error: ${err.message}`);
      return 2;
    }
    console.error(String(err));
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
