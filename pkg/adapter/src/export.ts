/** TokenGrid export: page images -> one JSONL line per page.
 *
 * Output schema (consumed verbatim by the docdep pipeline's grid reader):
 *
 *   {"page": 1, "dim": 64, "tokens": [[u, v, [z...]], ...]}
 *
 * Coordinates are patch centers on a uniform g x g lattice over [0,1]^2,
 * pages numbered from 1 in input order. Files are written atomically
 * (temp file + rename) and deterministically.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { loadModel } from "./features.js";
import { decodeImage } from "./image.js";

export interface ExportJob {
  /** Identifier of a locally available frozen model. */
  model: string;
  /** Page image paths in page order. */
  images: string[];
  /** Output JSONL path. */
  out: string;
  /** Tokens per side; token count per page is gridSize^2. */
  gridSize: number;
  /** Decoder layer to export; defaults to the final layer. */
  layer?: number;
}

export interface TokenGridLine {
  page: number;
  dim: number;
  tokens: [number, number, number[]][];
}

/** Patch-center lattice coordinate for index i of g. */
export function latticeCoord(i: number, g: number): number {
  return (i + 0.5) / g;
}

export function buildGrids(job: ExportJob): TokenGridLine[] {
  const model = loadModel(job.model);
  const layer = job.layer ?? model.layers - 1;
  if (layer < 0 || layer >= model.layers) {
    throw new RangeError(`layer ${layer} outside [0, ${model.layers})`);
  }
  const lines: TokenGridLine[] = [];
  job.images.forEach((imagePath, pageIdx) => {
    const image = decodeImage(imagePath);
    const states = model.encode(image, job.gridSize, layer);
    const tokens: [number, number, number[]][] = [];
    for (let gy = 0; gy < job.gridSize; gy++) {
      for (let gx = 0; gx < job.gridSize; gx++) {
        tokens.push([
          latticeCoord(gx, job.gridSize),
          latticeCoord(gy, job.gridSize),
          states[gy * job.gridSize + gx],
        ]);
      }
    }
    lines.push({ page: pageIdx + 1, dim: model.hiddenSize, tokens });
  });
  return lines;
}

export function serializeGrids(lines: TokenGridLine[]): string {
  return lines.map((l) => JSON.stringify(l)).join("\n") + (lines.length ? "\n" : "");
}

export function exportTokenGrid(job: ExportJob): void {
  const payload = serializeGrids(buildGrids(job));
  const dir = path.dirname(job.out);
  fs.mkdirSync(dir, { recursive: true });
  const tmp = path.join(dir, `.${path.basename(job.out)}.tmp-${process.pid}`);
  fs.writeFileSync(tmp, payload);
  fs.renameSync(tmp, job.out);
}
