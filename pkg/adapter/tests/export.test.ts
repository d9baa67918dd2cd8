import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ImageDecodeError, ModelUnavailable } from "../src/errors.js";
import { loadModel } from "../src/features.js";
import { decodeImage } from "../src/image.js";
import { buildGrids, exportTokenGrid, latticeCoord, serializeGrids } from "../src/export.js";
import { writePgm, writePng } from "./helpers.js";

let dir: string;
let pgm1: string;
let pgm2: string;
let png1: string;

beforeAll(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "tokengrid-"));
  pgm1 = path.join(dir, "page1.pgm");
  pgm2 = path.join(dir, "page2.pgm");
  png1 = path.join(dir, "page1.png");
  writePgm(pgm1, 96, 128);
  writePgm(pgm2, 96, 128);
  writePng(png1, 64, 80);
});

afterAll(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

describe("image decoding", () => {
  it("decodes PGM dimensions and range", () => {
    const img = decodeImage(pgm1);
    expect(img.width).toBe(96);
    expect(img.height).toBe(128);
    for (const v of img.pixels) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(255);
    }
  });

  it("decodes PNG", () => {
    const img = decodeImage(png1);
    expect(img.width).toBe(64);
    expect(img.height).toBe(80);
  });

  it("rejects garbage", () => {
    const bad = path.join(dir, "bad.bin");
    fs.writeFileSync(bad, Buffer.from("not an image"));
    expect(() => decodeImage(bad)).toThrow(ImageDecodeError);
  });

  it("rejects missing files", () => {
    expect(() => decodeImage(path.join(dir, "nope.png"))).toThrow(ImageDecodeError);
  });
});

describe("feature backend", () => {
  it("unknown model raises ModelUnavailable", () => {
    expect(() => loadModel("gpt-unobtainium")).toThrow(ModelUnavailable);
  });

  it("is frozen: same input, same states", () => {
    const model = loadModel("patch-stats-16");
    const img = decodeImage(pgm1);
    expect(model.encode(img, 8, 3)).toEqual(model.encode(img, 8, 3));
  });

  it("different layers differ", () => {
    const model = loadModel("patch-stats-16");
    const img = decodeImage(pgm1);
    expect(model.encode(img, 4, 0)).not.toEqual(model.encode(img, 4, 3));
  });
});

describe("TokenGrid export", () => {
  it("one line per page, dim equals model hidden size", () => {
    const lines = buildGrids({ model: "patch-stats-64", images: [pgm1, pgm2], out: "", gridSize: 8 });
    expect(lines.length).toBe(2);
    expect(lines.map((l) => l.page)).toEqual([1, 2]);
    for (const line of lines) {
      expect(line.dim).toBe(64);
      expect(line.tokens.length).toBe(64);
      for (const [, , z] of line.tokens) expect(z.length).toBe(64);
    }
  });

  it("coordinates form the declared uniform lattice over [0,1]^2", () => {
    const g = 6;
    const [line] = buildGrids({ model: "patch-stats-16", images: [pgm1], out: "", gridSize: g });
    expect(line.tokens.length).toBe(g * g);
    let i = 0;
    for (let gy = 0; gy < g; gy++) {
      for (let gx = 0; gx < g; gx++) {
        const [u, v] = line.tokens[i++];
        expect(u).toBeCloseTo(latticeCoord(gx, g), 12);
        expect(v).toBeCloseTo(latticeCoord(gy, g), 12);
        expect(u).toBeGreaterThan(0);
        expect(u).toBeLessThan(1);
        expect(v).toBeGreaterThan(0);
        expect(v).toBeLessThan(1);
      }
    }
  });

  it("re-export is byte-identical", () => {
    const out1 = path.join(dir, "a.jsonl");
    const out2 = path.join(dir, "b.jsonl");
    const job = { model: "patch-stats-16", images: [pgm1, pgm2], gridSize: 8 };
    exportTokenGrid({ ...job, out: out1 });
    exportTokenGrid({ ...job, out: out2 });
    expect(fs.readFileSync(out1)).toEqual(fs.readFileSync(out2));
  });

  it("layer flag defaults to the final layer", () => {
    const final = buildGrids({ model: "patch-stats-16", images: [pgm1], out: "", gridSize: 4 });
    const explicit = buildGrids({
      model: "patch-stats-16", images: [pgm1], out: "", gridSize: 4, layer: 3,
    });
    expect(serializeGrids(final)).toBe(serializeGrids(explicit));
  });

  it("out-of-range layer rejected", () => {
    expect(() =>
      buildGrids({ model: "patch-stats-16", images: [pgm1], out: "", gridSize: 4, layer: 99 }),
    ).toThrow(RangeError);
  });
});

describe("conformance with the consuming pipeline", () => {
  const hasPython = (() => {
    try {
      execFileSync("python3", ["-c", "import docdep"], { stdio: "pipe" });
      return true;
    } catch {
      return false;
    }
  })();

  it.skipIf(!hasPython)("exported files parse with zero warnings in the grid reader", () => {
    const out = path.join(dir, "conformance.jsonl");
    exportTokenGrid({ model: "patch-stats-64", images: [pgm1, pgm2], out, gridSize: 16 });
    const script = [
      "import sys",
      "from docdep.softroi import read_grids",
      "with open(sys.argv[1]) as fh:",
      "    grids = read_grids(fh)",
      "assert [g.page for g in grids] == [1, 2]",
      "for g in grids:",
      "    assert g.dim == 64 and g.vectors.shape == (256, 64)",
      "    assert g.coords.min() > 0 and g.coords.max() < 1",
      "print('ok')",
    ].join("\n");
    const stdout = execFileSync("python3", ["-W", "error", "-c", script, out], {
      encoding: "utf8",
    });
    expect(stdout.trim()).toBe("ok");
  });
});
