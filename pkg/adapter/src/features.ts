/** Deterministic frozen-model feature backends.
 *
 * Real deployments plug an LVLM in here; for a self-contained adapter we
 * ship a "patch-stats" backend that computes local statistics per grid
 * patch and projects them through a pseudo-random matrix derived from the
 * model identifier. The backend is frozen by construction: the same image,
 * model id, layer, and grid resolution always produce the same hidden
 * states.
 */

import { ModelUnavailable } from "./errors.js";
import type { GrayImage } from "./image.js";

export interface FeatureModel {
  id: string;
  hiddenSize: number;
  layers: number;
  /** Hidden states for one page: g*g rows of hiddenSize values, row-major over the lattice. */
  encode(image: GrayImage, gridSize: number, layer: number): number[][];
}

/** FNV-1a over a string, for seeding. */
function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: small, fast, reproducible across platforms. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const N_STATS = 6;

/** Per-patch statistics: mean, std, horizontal/vertical gradient energy, min, max. */
function patchStats(image: GrayImage, gridSize: number): number[][] {
  const out: number[][] = [];
  for (let gy = 0; gy < gridSize; gy++) {
    for (let gx = 0; gx < gridSize; gx++) {
      const x0 = Math.floor((gx * image.width) / gridSize);
      const x1 = Math.max(x0 + 1, Math.floor(((gx + 1) * image.width) / gridSize));
      const y0 = Math.floor((gy * image.height) / gridSize);
      const y1 = Math.max(y0 + 1, Math.floor(((gy + 1) * image.height) / gridSize));
      let sum = 0;
      let sumSq = 0;
      let gradX = 0;
      let gradY = 0;
      let min = Infinity;
      let max = -Infinity;
      let n = 0;
      for (let y = y0; y < y1; y++) {
        for (let x = x0; x < x1; x++) {
          const v = image.pixels[y * image.width + x];
          sum += v;
          sumSq += v * v;
          if (v < min) min = v;
          if (v > max) max = v;
          if (x + 1 < x1) gradX += Math.abs(image.pixels[y * image.width + x + 1] - v);
          if (y + 1 < y1) gradY += Math.abs(image.pixels[(y + 1) * image.width + x] - v);
          n++;
        }
      }
      const mean = sum / n;
      const variance = Math.max(0, sumSq / n - mean * mean);
      out.push([
        mean / 255,
        Math.sqrt(variance) / 255,
        gradX / (n * 255),
        gradY / (n * 255),
        min / 255,
        max / 255,
      ]);
    }
  }
  return out;
}

class PatchStatsModel implements FeatureModel {
  readonly id: string;
  readonly hiddenSize: number;
  readonly layers: number;
  private readonly projections: number[][][]; // [layer][hidden][stat]

  constructor(id: string, hiddenSize: number, layers: number) {
    this.id = id;
    this.hiddenSize = hiddenSize;
    this.layers = layers;
    this.projections = [];
    for (let layer = 0; layer < layers; layer++) {
      const rand = mulberry32(fnv1a(`${id}:layer${layer}`));
      const rows: number[][] = [];
      for (let i = 0; i < hiddenSize; i++) {
        const row: number[] = [];
        for (let j = 0; j < N_STATS; j++) row.push((rand() * 2 - 1) / Math.sqrt(N_STATS));
        rows.push(row);
      }
      this.projections.push(rows);
    }
  }

  encode(image: GrayImage, gridSize: number, layer: number): number[][] {
    const proj = this.projections[layer];
    return patchStats(image, gridSize).map((stats) =>
      proj.map((row) => row.reduce((acc, w, j) => acc + w * stats[j], 0)),
    );
  }
}

/** Locally available frozen models. */
const REGISTRY: Record<string, { hiddenSize: number; layers: number }> = {
  "patch-stats-64": { hiddenSize: 64, layers: 4 },
  "patch-stats-16": { hiddenSize: 16, layers: 4 },
};

export function loadModel(modelId: string): FeatureModel {
  const entry = REGISTRY[modelId];
  if (!entry) throw new ModelUnavailable(modelId);
  return new PatchStatsModel(modelId, entry.hiddenSize, entry.layers);
}

export function availableModels(): string[] {
  return Object.keys(REGISTRY).sort();
}
