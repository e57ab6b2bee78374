/** Shared test utilities: a seeded PRNG and a hand-rolled PNG builder
 * so decoder tests can pick exact scanline filters. */

/** mulberry32: tiny deterministic PRNG, returns floats in [0, 1). */
export function seededRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomRgba(rng: () => number, width: number, height: number): Uint8Array {
  const out = new Uint8Array(width * height * 4);
  for (let i = 0; i < out.length; i++) out[i] = Math.floor(rng() * 256);
  return out;
}

export function fromBase64(data: string): Uint8Array {
  const bin = atob(data);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...parts: Uint8Array[]): number {
  let c = 0xffffffff;
  for (const part of parts) {
    for (let i = 0; i < part.length; i++) c = CRC_TABLE[(c ^ part[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function u32be(value: number): Uint8Array {
  return new Uint8Array([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
}

function chunk(tag: string, body: Uint8Array): Uint8Array {
  const name = new Uint8Array([...tag].map((ch) => ch.charCodeAt(0)));
  const out = new Uint8Array(12 + body.length);
  out.set(u32be(body.length), 0);
  out.set(name, 4);
  out.set(body, 8);
  out.set(u32be(crc32(name, body)), 8 + body.length);
  return out;
}

async function deflate(data: Uint8Array): Promise<Uint8Array> {
  const fed = new Blob([data as BlobPart]).stream().pipeThrough(new CompressionStream("deflate") as never);
  return new Uint8Array(await new Response(fed as never).arrayBuffer());
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export interface BuildOptions {
  colorType?: number; // 0 grey, 2 RGB, 6 RGBA
  bitDepth?: number;
  interlace?: number;
  /** Filter byte per row; defaults to all zero. */
  filters?: number[];
}

/** Assemble a PNG from raw channel bytes, forward-applying the requested
 * per-row filters, so the decoder under test must invert them. */
export async function buildPng(
  pixels: Uint8Array,
  width: number,
  height: number,
  options: BuildOptions = {},
): Promise<Uint8Array> {
  const colorType = options.colorType ?? 6;
  const channels = colorType === 0 ? 1 : colorType === 2 ? 3 : 4;
  const stride = width * channels;
  if (pixels.length !== stride * height) throw new Error("pixel buffer does not match dimensions");

  const raw = new Uint8Array((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    const filter = options.filters?.[y] ?? 0;
    raw[y * (stride + 1)] = filter;
    const row = pixels.subarray(y * stride, (y + 1) * stride);
    const prev = y > 0 ? pixels.subarray((y - 1) * stride, y * stride) : null;
    for (let x = 0; x < stride; x++) {
      const left = x >= channels ? row[x - channels] : 0;
      const up = prev ? prev[x] : 0;
      const upLeft = prev && x >= channels ? prev[x - channels] : 0;
      let value = row[x];
      switch (filter) {
        case 0: break;
        case 1: value -= left; break;
        case 2: value -= up; break;
        case 3: value -= (left + up) >> 1; break;
        case 4: value -= paeth(left, up, upLeft); break;
        default: break; // deliberately bogus filters pass through for error tests
      }
      raw[y * (stride + 1) + 1 + x] = value & 0xff;
    }
  }

  const ihdr = new Uint8Array(13);
  ihdr.set(u32be(width), 0);
  ihdr.set(u32be(height), 4);
  ihdr.set([options.bitDepth ?? 8, colorType, 0, 0, options.interlace ?? 0], 8);
  const idat = await deflate(raw);

  const parts = [
    new Uint8Array([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", idat),
    chunk("IEND", new Uint8Array(0)),
  ];
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let at = 0;
  for (const part of parts) {
    out.set(part, at);
    at += part.length;
  }
  return out;
}
