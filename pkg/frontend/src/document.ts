/** Vector stroke document with snapshot-based undo/redo.
 *
 * Strokes stay vectors until export, so undo never depends on canvas
 * state. Every mutator pushes exactly one undo entry; N operations
 * followed by N undos restore the initial document.
 */

export interface Point {
  x: number;
  y: number;
}

export type Rgb = [number, number, number];

export interface Stroke {
  points: Point[];
  color: Rgb;
  width: number;
}

function cloneStroke(stroke: Stroke): Stroke {
  return {
    points: stroke.points.map((p) => ({ x: p.x, y: p.y })),
    color: [stroke.color[0], stroke.color[1], stroke.color[2]],
    width: stroke.width,
  };
}

function validateStroke(stroke: Stroke): void {
  if (stroke.points.length === 0) throw new Error("stroke needs at least one point");
  if (!(stroke.width > 0)) throw new Error(`stroke width must be > 0, got ${stroke.width}`);
  for (const c of stroke.color) {
    if (!Number.isInteger(c) || c < 0 || c > 255) {
      throw new Error(`color channels must be integers in 0..255, got ${stroke.color}`);
    }
  }
  for (const p of stroke.points) {
    if (!Number.isFinite(p.x) || !Number.isFinite(p.y)) {
      throw new Error("stroke points must be finite");
    }
  }
}

export class StrokeDocument {
  readonly width: number;
  readonly height: number;
  /** Encoded PNG of the loaded line art; sent verbatim on submit. */
  readonly lineArt: Uint8Array;

  private strokes: readonly Stroke[] = [];
  private undoStack: (readonly Stroke[])[] = [];
  private redoStack: (readonly Stroke[])[] = [];

  constructor(width: number, height: number, lineArt: Uint8Array) {
    if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
      throw new Error(`canvas dimensions must be positive integers, got ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.lineArt = lineArt;
  }

  getStrokes(): readonly Stroke[] {
    return this.strokes;
  }

  get strokeCount(): number {
    return this.strokes.length;
  }

  addStroke(stroke: Stroke): void {
    validateStroke(stroke);
    this.commit([...this.strokes, cloneStroke(stroke)]);
  }

  removeStroke(index: number): void {
    if (!Number.isInteger(index) || index < 0 || index >= this.strokes.length) {
      throw new Error(`no stroke at index ${index}`);
    }
    this.commit(this.strokes.filter((_, i) => i !== index));
  }

  clearStrokes(): void {
    this.commit([]);
  }

  private commit(next: readonly Stroke[]): void {
    this.undoStack.push(this.strokes);
    this.redoStack = [];
    this.strokes = next;
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  undo(): boolean {
    const previous = this.undoStack.pop();
    if (previous === undefined) return false;
    this.redoStack.push(this.strokes);
    this.strokes = previous;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (next === undefined) return false;
    this.undoStack.push(this.strokes);
    this.strokes = next;
    return true;
  }
}
