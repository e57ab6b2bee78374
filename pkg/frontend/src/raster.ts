/** Deterministic stroke rasterizer.
 *
 * Round stamps along each polyline segment; a pixel is painted when its
 * center falls inside the stamp disc. Alpha is binary (255 on stroked
 * pixels, 0 elsewhere) and later strokes overwrite earlier ones, so the
 * same document always renders to the same bytes.
 */

import type { Stroke, StrokeDocument } from "./document.js";

function stampDisc(
  rgba: Uint8Array,
  width: number,
  height: number,
  cx: number,
  cy: number,
  radius: number,
  color: readonly number[],
): void {
  const r2 = radius * radius;
  const x0 = Math.max(0, Math.floor(cx - radius - 1));
  const x1 = Math.min(width - 1, Math.ceil(cx + radius + 1));
  const y0 = Math.max(0, Math.floor(cy - radius - 1));
  const y1 = Math.min(height - 1, Math.ceil(cy + radius + 1));
  for (let y = y0; y <= y1; y++) {
    const dy = y + 0.5 - cy;
    for (let x = x0; x <= x1; x++) {
      const dx = x + 0.5 - cx;
      if (dx * dx + dy * dy <= r2) {
        const at = (y * width + x) * 4;
        rgba[at] = color[0];
        rgba[at + 1] = color[1];
        rgba[at + 2] = color[2];
        rgba[at + 3] = 255;
      }
    }
  }
}

function stampStroke(rgba: Uint8Array, width: number, height: number, stroke: Stroke): void {
  const radius = stroke.width / 2;
  const pts = stroke.points;
  stampDisc(rgba, width, height, pts[0].x, pts[0].y, radius, stroke.color);
  for (let i = 1; i < pts.length; i++) {
    const ax = pts[i - 1].x;
    const ay = pts[i - 1].y;
    const dx = pts[i].x - ax;
    const dy = pts[i].y - ay;
    // one stamp per pixel of travel along the dominant axis
    const steps = Math.max(1, Math.ceil(Math.max(Math.abs(dx), Math.abs(dy))));
    for (let s = 1; s <= steps; s++) {
      const t = s / steps;
      stampDisc(rgba, width, height, ax + dx * t, ay + dy * t, radius, stroke.color);
    }
  }
}

/** Render the document's strokes to a straight-alpha RGBA buffer of
 * exactly the canvas dimensions. Strokes reaching outside the canvas
 * are clipped, never an error. */
export function rasterizeStrokes(doc: StrokeDocument): Uint8Array {
  const rgba = new Uint8Array(doc.width * doc.height * 4);
  for (const stroke of doc.getStrokes()) {
    stampStroke(rgba, doc.width, doc.height, stroke);
  }
  return rgba;
}
