/** Minimal page-image decoding: PGM/PPM (binary and ASCII) and basic PNG.
 *
 * The exporter only needs grayscale intensities on a known raster, so we
 * decode to a single luma channel. PNG support covers the common page-render
 * case: 8-bit, non-interlaced, gray/RGB/RGBA/gray+alpha.
 */

import * as fs from "node:fs";
import * as zlib from "node:zlib";

import { ImageDecodeError } from "./errors.js";

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major luma values in [0, 255]. */
  pixels: Float64Array;
}

function luma(r: number, g: number, b: number): number {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

function decodePnm(path: string, data: Buffer): GrayImage {
  const magic = data.subarray(0, 2).toString("ascii");
  // tokenizer over the header: whitespace-separated fields, # comments
  let pos = 2;
  const nextToken = (): string => {
    for (;;) {
      while (pos < data.length && /\s/.test(String.fromCharCode(data[pos]))) pos++;
      if (pos < data.length && data[pos] === 0x23) {
        while (pos < data.length && data[pos] !== 0x0a) pos++;
        continue;
      }
      break;
    }
    const start = pos;
    while (pos < data.length && !/\s/.test(String.fromCharCode(data[pos]))) pos++;
    if (start === pos) throw new ImageDecodeError(path, "truncated header");
    return data.subarray(start, pos).toString("ascii");
  };

  const width = parseInt(nextToken(), 10);
  const height = parseInt(nextToken(), 10);
  const maxval = parseInt(nextToken(), 10);
  if (!(width > 0 && height > 0 && maxval > 0 && maxval < 65536)) {
    throw new ImageDecodeError(path, "bad PNM dimensions");
  }
  const n = width * height;
  const pixels = new Float64Array(n);
  const scale = 255 / maxval;

  if (magic === "P5" || magic === "P6") {
    pos++; // single whitespace byte after maxval
    const channels = magic === "P6" ? 3 : 1;
    const bytesPer = maxval > 255 ? 2 : 1;
    const need = n * channels * bytesPer;
    if (data.length - pos < need) throw new ImageDecodeError(path, "truncated pixel data");
    for (let i = 0; i < n; i++) {
      const base = pos + i * channels * bytesPer;
      const read = (c: number) =>
        bytesPer === 2 ? data.readUInt16BE(base + c * 2) : data[base + c];
      pixels[i] = (channels === 3 ? luma(read(0), read(1), read(2)) : read(0)) * scale;
    }
  } else if (magic === "P2" || magic === "P3") {
    const channels = magic === "P3" ? 3 : 1;
    for (let i = 0; i < n; i++) {
      if (channels === 3) {
        const r = parseInt(nextToken(), 10);
        const g = parseInt(nextToken(), 10);
        const b = parseInt(nextToken(), 10);
        pixels[i] = luma(r, g, b) * scale;
      } else {
        pixels[i] = parseInt(nextToken(), 10) * scale;
      }
    }
  } else {
    throw new ImageDecodeError(path, `unsupported PNM magic ${magic}`);
  }
  return { width, height, pixels };
}

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function decodePng(path: string, data: Buffer): GrayImage {
  let pos = 8;
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  const idat: Buffer[] = [];
  while (pos + 8 <= data.length) {
    const len = data.readUInt32BE(pos);
    const type = data.subarray(pos + 4, pos + 8).toString("ascii");
    const body = data.subarray(pos + 8, pos + 8 + len);
    if (type === "IHDR") {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      bitDepth = body[8];
      colorType = body[9];
      if (body[12] !== 0) throw new ImageDecodeError(path, "interlaced PNG not supported");
      if (bitDepth !== 8) throw new ImageDecodeError(path, `bit depth ${bitDepth} not supported`);
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + len;
  }
  if (!width || !height || idat.length === 0) {
    throw new ImageDecodeError(path, "missing IHDR/IDAT");
  }
  const channels = { 0: 1, 2: 3, 4: 2, 6: 4 }[colorType as 0 | 2 | 4 | 6];
  if (channels === undefined) throw new ImageDecodeError(path, `color type ${colorType} not supported`);

  let raw: Buffer;
  try {
    raw = zlib.inflateSync(Buffer.concat(idat));
  } catch (e) {
    throw new ImageDecodeError(path, `zlib: ${(e as Error).message}`);
  }
  const stride = width * channels;
  if (raw.length < height * (stride + 1)) throw new ImageDecodeError(path, "short IDAT stream");

  const pixels = new Float64Array(width * height);
  const prior = new Uint8Array(stride);
  const line = new Uint8Array(stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const rowStart = y * (stride + 1) + 1;
    for (let x = 0; x < stride; x++) {
      const v = raw[rowStart + x];
      const left = x >= channels ? line[x - channels] : 0;
      const up = prior[x];
      const upLeft = x >= channels ? prior[x - channels] : 0;
      let out: number;
      switch (filter) {
        case 0: out = v; break;
        case 1: out = v + left; break;
        case 2: out = v + up; break;
        case 3: out = v + ((left + up) >> 1); break;
        case 4: out = v + paeth(left, up, upLeft); break;
        default: throw new ImageDecodeError(path, `filter ${filter} not supported`);
      }
      line[x] = out & 0xff;
    }
    for (let x = 0; x < width; x++) {
      const base = x * channels;
      pixels[y * width + x] =
        channels >= 3 ? luma(line[base], line[base + 1], line[base + 2]) : line[base];
    }
    prior.set(line);
  }
  return { width, height, pixels };
}

/** Decode a page image to grayscale; raises ImageDecodeError on anything unreadable. */
export function decodeImage(path: string): GrayImage {
  let data: Buffer;
  try {
    data = fs.readFileSync(path);
  } catch (e) {
    throw new ImageDecodeError(path, (e as Error).message);
  }
  if (data.length >= 8 && data.subarray(0, 8).equals(PNG_SIGNATURE)) {
    return decodePng(path, data);
  }
  const magic = data.subarray(0, 2).toString("ascii");
  if (["P2", "P3", "P5", "P6"].includes(magic)) {
    return decodePnm(path, data);
  }
  throw new ImageDecodeError(path, "unknown format (expected PNG or PNM)");
}
