#!/usr/bin/env node
/** tokengrid-export: run a frozen feature backend over page images.
 *
 *   tokengrid-export --model patch-stats-64 --out grids.jsonl \
 *       --grid-size 16 [--layer N] page1.png page2.png ...
 *
 * Exit codes: 0 ok, 1 usage, 2 data error (unreadable image / unknown model).
 */

import { ImageDecodeError, ModelUnavailable } from "./errors.js";
import { availableModels } from "./features.js";
import { exportTokenGrid, type ExportJob } from "./export.js";

function usage(): never {
  console.error(
    "usage: tokengrid-export --model <id> --out <path> [--grid-size N] [--layer N] <image...>",
  );
  console.error(`models: ${availableModels().join(", ")}`);
  process.exit(1);
}

export function parseArgs(argv: string[]): ExportJob {
  let model: string | undefined;
  let out: string | undefined;
  let gridSize = 16;
  let layer: number | undefined;
  const images: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) usage();
      return argv[++i];
    };
    if (arg === "--model") model = next();
    else if (arg === "--out") out = next();
    else if (arg === "--grid-size") gridSize = parseInt(next(), 10);
    else if (arg === "--layer") layer = parseInt(next(), 10);
    else if (arg.startsWith("--")) usage();
    else images.push(arg);
  }
  if (!model || !out || images.length === 0 || !(gridSize >= 2)) usage();
  return { model, out, gridSize, layer, images };
}

export function main(argv: string[]): number {
  try {
    const job = parseArgs(argv);
    exportTokenGrid(job);
    return 0;
  } catch (e) {
    if (e instanceof ModelUnavailable || e instanceof ImageDecodeError) {
      console.error(`${e.name}: ${e.message}`);
      return 2;
    }
    throw e;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
