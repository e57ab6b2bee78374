/** Minimal PNG codec on top of the platform deflate streams.
 *
 * Encodes 8-bit RGBA (color type 6, filter 0 rows); decodes 8-bit
 * greyscale, RGB and RGBA, non-interlaced, with all five scanline
 * filters. Works in browsers and Node >= 20 without dependencies.
 */

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...parts: Uint8Array[]): number {
  let c = 0xffffffff;
  for (const part of parts) {
    for (let i = 0; i < part.length; i++) {
      c = CRC_TABLE[(c ^ part[i]) & 0xff] ^ (c >>> 8);
    }
  }
  return (c ^ 0xffffffff) >>> 0;
}

function u32be(value: number): Uint8Array {
  return new Uint8Array([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
}

function readU32be(data: Uint8Array, at: number): number {
  return ((data[at] << 24) | (data[at + 1] << 16) | (data[at + 2] << 8) | data[at + 3]) >>> 0;
}

function ascii(tag: string): Uint8Array {
  return new Uint8Array([...tag].map((ch) => ch.charCodeAt(0)));
}

function chunk(tag: string, body: Uint8Array): Uint8Array {
  const name = ascii(tag);
  const out = new Uint8Array(12 + body.length);
  out.set(u32be(body.length), 0);
  out.set(name, 4);
  out.set(body, 8);
  out.set(u32be(crc32(name, body)), 8 + body.length);
  return out;
}

async function pipe(data: Uint8Array, stream: { readable: ReadableStream; writable: WritableStream }): Promise<Uint8Array> {
  const fed = new Blob([data as BlobPart]).stream().pipeThrough(stream as never);
  return new Uint8Array(await new Response(fed as never).arrayBuffer());
}

function deflate(data: Uint8Array): Promise<Uint8Array> {
  return pipe(data, new CompressionStream("deflate"));
}

function inflate(data: Uint8Array): Promise<Uint8Array> {
  return pipe(data, new DecompressionStream("deflate"));
}

/** Encode straight-alpha RGBA bytes (length width*height*4) as a PNG. */
export async function encodePng(rgba: Uint8Array, width: number, height: number): Promise<Uint8Array> {
  if (rgba.length !== width * height * 4) {
    throw new Error(`rgba length ${rgba.length} does not match ${width}x${height}x4`);
  }
  const ihdr = new Uint8Array(13);
  ihdr.set(u32be(width), 0);
  ihdr.set(u32be(height), 4);
  ihdr.set([8, 6, 0, 0, 0], 8); // 8-bit RGBA, deflate, adaptive, no interlace

  const stride = width * 4;
  const raw = new Uint8Array((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: none
    raw.set(rgba.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }
  const idat = await deflate(raw);

  const parts = [new Uint8Array(SIGNATURE), chunk("IHDR", ihdr), chunk("IDAT", idat), chunk("IEND", new Uint8Array(0))];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const part of parts) {
    out.set(part, at);
    at += part.length;
  }
  return out;
}

export interface DecodedImage {
  width: number;
  height: number;
  /** Always RGBA, straight alpha. */
  rgba: Uint8Array;
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

function unfilter(raw: Uint8Array, width: number, height: number, channels: number): Uint8Array {
  const stride = width * channels;
  const out = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const prev = y > 0 ? out.subarray((y - 1) * stride, y * stride) : null;
    const dest = out.subarray(y * stride, (y + 1) * stride);
    for (let x = 0; x < stride; x++) {
      const left = x >= channels ? dest[x - channels] : 0;
      const up = prev ? prev[x] : 0;
      const upLeft = prev && x >= channels ? prev[x - channels] : 0;
      let value = row[x];
      switch (filter) {
        case 0: break;
        case 1: value += left; break;
        case 2: value += up; break;
        case 3: value += (left + up) >> 1; break;
        case 4: value += paeth(left, up, upLeft); break;
        default: throw new Error(`unsupported scanline filter ${filter}`);
      }
      dest[x] = value & 0xff;
    }
  }
  return out;
}

/** Decode an 8-bit non-interlaced greyscale/RGB/RGBA PNG to RGBA. */
export async function decodePng(data: Uint8Array): Promise<DecodedImage> {
  if (data.length < 8 || SIGNATURE.some((byte, i) => data[i] !== byte)) {
    throw new Error("not a PNG: bad signature");
  }
  let at = 8;
  let width = 0;
  let height = 0;
  let colorType = -1;
  const idatParts: Uint8Array[] = [];
  while (at + 8 <= data.length) {
    const length = readU32be(data, at);
    const tag = String.fromCharCode(data[at + 4], data[at + 5], data[at + 6], data[at + 7]);
    const body = data.subarray(at + 8, at + 8 + length);
    if (tag === "IHDR") {
      width = readU32be(body, 0);
      height = readU32be(body, 4);
      const bitDepth = body[8];
      colorType = body[9];
      if (bitDepth !== 8) throw new Error(`unsupported bit depth ${bitDepth}`);
      if (colorType !== 0 && colorType !== 2 && colorType !== 6) {
        throw new Error(`unsupported color type ${colorType}`);
      }
      if (body[12] !== 0) throw new Error("interlaced PNGs are not supported");
    } else if (tag === "IDAT") {
      idatParts.push(body);
    } else if (tag === "IEND") {
      break;
    }
    at += 12 + length;
  }
  if (width === 0 || height === 0 || idatParts.length === 0) {
    throw new Error("truncated PNG: missing IHDR or IDAT");
  }
  const compressed = new Uint8Array(idatParts.reduce((n, p) => n + p.length, 0));
  let offset = 0;
  for (const part of idatParts) {
    compressed.set(part, offset);
    offset += part.length;
  }
  const channels = colorType === 0 ? 1 : colorType === 2 ? 3 : 4;
  const raw = await inflate(compressed);
  if (raw.length !== (width * channels + 1) * height) {
    throw new Error("corrupt PNG: decompressed size mismatch");
  }
  const pixels = unfilter(raw, width, height, channels);

  if (channels === 4) return { width, height, rgba: pixels };
  const rgba = new Uint8Array(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    if (channels === 1) {
      rgba[i * 4] = rgba[i * 4 + 1] = rgba[i * 4 + 2] = pixels[i];
    } else {
      rgba[i * 4] = pixels[i * 3];
      rgba[i * 4 + 1] = pixels[i * 3 + 1];
      rgba[i * 4 + 2] = pixels[i * 3 + 2];
    }
    rgba[i * 4 + 3] = 255;
  }
  return { width, height, rgba };
}
