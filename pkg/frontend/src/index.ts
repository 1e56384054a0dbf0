export { parseBenchCsv, SchemaError, REQUIRED_COLUMNS } from "./schema.js";
export type { BenchRow } from "./schema.js";
export {
  FIGURE_KINDS,
  FigureError,
  renderFigure,
  renderGrid,
  renderMethodCompare,
  renderShotsSweep,
} from "./figures.js";
export type { FigureKind, RenderResult } from "./figures.js";
export { mean, spearman, groupBy } from "./stats.js";
export { main as cliMain, parseArgs } from "./cli.js";
