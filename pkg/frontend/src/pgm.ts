/** Binary PGM (P5) decoding for frames pushed over the stream channel.
 *
 * The comment line carries key=value metadata (camera id, sequence number,
 * render timestamp) written by the server.
 */

export interface DecodedFrame {
  width: number;
  height: number;
  pixels: Uint8Array;
  metadata: Record<string, string>;
}

export function decodePgm(data: ArrayBuffer | Uint8Array): DecodedFrame {
  const bytes = data instanceof Uint8Array ? data : new Uint8Array(data);
  if (bytes[0] !== 0x50 || bytes[1] !== 0x35) {
    throw new Error("not a binary PGM (missing P5 magic)");
  }
  const metadata: Record<string, string> = {};
  let pos = 2;
  const tokens: number[] = [];

  const isSpace = (b: number) => b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;

  while (tokens.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (bytes[pos] === 0x23 /* '#' */) {
      let end = pos;
      while (end < bytes.length && bytes[end] !== 0x0a) end++;
      const comment = new TextDecoder().decode(bytes.subarray(pos + 1, end)).trim();
      for (const token of comment.split(/\s+/)) {
        const eq = token.indexOf("=");
        if (eq > 0) metadata[token.slice(0, eq)] = token.slice(eq + 1);
      }
      pos = end;
      continue;
    }
    let start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    tokens.push(parseInt(new TextDecoder().decode(bytes.subarray(start, pos)), 10));
  }
  const [width, height, maxval] = tokens;
  if (maxval !== 255) throw new Error(`unsupported maxval ${maxval}`);
  pos++; // the single whitespace after maxval
  const pixels = bytes.subarray(pos, pos + width * height);
  if (pixels.length !== width * height) throw new Error("truncated PGM raster");
  return { width, height, pixels: new Uint8Array(pixels), metadata };
}

/** Paint a decoded grayscale frame into RGBA image data for a canvas. */
export function toRgba(frame: DecodedFrame): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(new ArrayBuffer(frame.width * frame.height * 4));
  for (let i = 0; i < frame.pixels.length; i++) {
    const v = frame.pixels[i];
    out[i * 4] = v;
    out[i * 4 + 1] = v;
    out[i * 4 + 2] = v;
    out[i * 4 + 3] = 255;
  }
  return out;
}
