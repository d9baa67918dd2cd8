import * as fs from "node:fs";
import * as zlib from "node:zlib";

/** Binary P5 PGM with a deterministic synthetic page texture. */
export function writePgm(path: string, width: number, height: number): void {
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, "ascii");
  const body = Buffer.alloc(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      // horizontal "text lines" every 8 rows plus a gradient background
      const line = y % 8 < 3 ? 40 : 230;
      body[y * width + x] = (line + ((x * 7) % 25)) & 0xff;
    }
  }
  fs.writeFileSync(path, Buffer.concat([header, body]));
}

function crc32(buf: Buffer): number {
  let crc = ~0;
  for (let i = 0; i < buf.length; i++) {
    crc ^= buf[i];
    for (let k = 0; k < 8; k++) crc = (crc >>> 1) ^ (0xedb88320 & -(crc & 1));
  }
  return ~crc >>> 0;
}

function chunk(type: string, body: Buffer): Buffer {
  const len = Buffer.alloc(4);
  len.writeUInt32BE(body.length);
  const typed = Buffer.concat([Buffer.from(type, "ascii"), body]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(typed));
  return Buffer.concat([len, typed, crc]);
}

/** Minimal 8-bit RGB non-interlaced PNG with a checkerboard pattern. */
export function writePng(path: string, width: number, height: number): void {
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 2; // RGB
  const stride = width * 3;
  const raw = Buffer.alloc(height * (stride + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: none
    for (let x = 0; x < width; x++) {
      const v = (Math.floor(x / 4) + Math.floor(y / 4)) % 2 ? 220 : 30;
      const base = y * (stride + 1) + 1 + x * 3;
      raw[base] = v;
      raw[base + 1] = (v + x) & 0xff;
      raw[base + 2] = (v + y) & 0xff;
    }
  }
  const png = Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", zlib.deflateSync(raw)),
    chunk("IEND", Buffer.alloc(0)),
  ]);
  fs.writeFileSync(path, png);
}
