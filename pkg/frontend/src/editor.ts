/** Canvas editor wiring: load a line art, scribble strokes, submit,
 * compare results. Pure logic lives in the sibling modules; this file
 * only connects them to the DOM. */

import { StrokeDocument, type Stroke, type Rgb } from "./document.js";
import { rasterizeStrokes } from "./raster.js";
import { decodePng } from "./png.js";
import { ServiceClient, ServiceError, SubmitQueue, type ColorizeResult } from "./client.js";

interface HistoryEntry {
  strokes: number;
  url: string;
}

function hexToRgb(hex: string): Rgb {
  return [
    parseInt(hex.slice(1, 3), 16),
    parseInt(hex.slice(3, 5), 16),
    parseInt(hex.slice(5, 7), 16),
  ];
}

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

export function startEditor(): void {
  const canvas = byId<HTMLCanvasElement>("editor");
  const ctx = canvas.getContext("2d")!;
  const result = byId<HTMLImageElement>("result");
  const banner = byId<HTMLDivElement>("banner");
  const fileInput = byId<HTMLInputElement>("file");
  const colorInput = byId<HTMLInputElement>("color");
  const widthInput = byId<HTMLInputElement>("width");
  const greyToggle = byId<HTMLInputElement>("grey");
  const recentRow = byId<HTMLDivElement>("recent");
  const historyRow = byId<HTMLDivElement>("history");
  const client = new ServiceClient("");

  let doc: StrokeDocument | null = null;
  let lineArtPixels: ImageData | null = null;
  let drawing: Stroke | null = null;
  const recentColors: string[] = [];
  const history: HistoryEntry[] = [];

  const queue = new SubmitQueue<ColorizeResult>(
    (res) => {
      banner.textContent = "";
      const url = URL.createObjectURL(new Blob([res.image as BlobPart], { type: "image/png" }));
      result.src = url;
      history.push({ strokes: doc?.strokeCount ?? 0, url });
      renderHistory();
    },
    (error) => {
      // error codes from the service are shown verbatim, retry stays enabled
      banner.textContent = error instanceof ServiceError
        ? `${error.status}: ${error.detail}`
        : String(error);
    },
  );

  function renderHistory(): void {
    historyRow.replaceChildren(
      ...history.slice(-8).map((entry) => {
        const img = document.createElement("img");
        img.src = entry.url;
        img.title = `${entry.strokes} strokes`;
        img.width = 96;
        return img;
      }),
    );
  }

  function rememberColor(hex: string): void {
    const at = recentColors.indexOf(hex);
    if (at >= 0) recentColors.splice(at, 1);
    recentColors.unshift(hex);
    recentColors.length = Math.min(recentColors.length, 8);
    recentRow.replaceChildren(
      ...recentColors.map((value) => {
        const swatch = document.createElement("button");
        swatch.style.background = value;
        swatch.addEventListener("click", () => {
          colorInput.value = value;
        });
        return swatch;
      }),
    );
  }

  function redraw(): void {
    if (!doc) return;
    // grey backdrop is a viewing aid only; exported RGBA is unchanged
    ctx.fillStyle = greyToggle.checked ? "#808080" : "#ffffff";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (lineArtPixels) {
      ctx.putImageData(lineArtPixels, 0, 0);
    }
    const overlay = rasterizeStrokes(doc);
    const image = new ImageData(new Uint8ClampedArray(overlay), doc.width, doc.height);
    const scratch = document.createElement("canvas");
    scratch.width = doc.width;
    scratch.height = doc.height;
    scratch.getContext("2d")!.putImageData(image, 0, 0);
    ctx.drawImage(scratch, 0, 0);
  }

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    const bytes = new Uint8Array(await file.arrayBuffer());
    try {
      const decoded = await decodePng(bytes);
      doc = new StrokeDocument(decoded.width, decoded.height, bytes);
      canvas.width = decoded.width;
      canvas.height = decoded.height;
      lineArtPixels = new ImageData(new Uint8ClampedArray(decoded.rgba), decoded.width, decoded.height);
      banner.textContent = "";
      redraw();
    } catch (error) {
      banner.textContent = String(error);
    }
  });

  canvas.addEventListener("pointerdown", (event) => {
    if (!doc) return;
    const box = canvas.getBoundingClientRect();
    drawing = {
      points: [{ x: event.clientX - box.left, y: event.clientY - box.top }],
      color: hexToRgb(colorInput.value),
      width: Number(widthInput.value),
    };
  });

  canvas.addEventListener("pointermove", (event) => {
    if (!drawing) return;
    const box = canvas.getBoundingClientRect();
    drawing.points.push({ x: event.clientX - box.left, y: event.clientY - box.top });
    redraw();
    if (doc) {
      // live preview: render committed strokes plus the one in progress
      const preview = new StrokeDocument(doc.width, doc.height, doc.lineArt);
      for (const s of doc.getStrokes()) preview.addStroke(s);
      preview.addStroke(drawing);
      const overlay = rasterizeStrokes(preview);
      const image = new ImageData(new Uint8ClampedArray(overlay), doc.width, doc.height);
      const scratch = document.createElement("canvas");
      scratch.width = doc.width;
      scratch.height = doc.height;
      scratch.getContext("2d")!.putImageData(image, 0, 0);
      ctx.drawImage(scratch, 0, 0);
    }
  });

  const finishStroke = () => {
    if (doc && drawing) {
      doc.addStroke(drawing);
      rememberColor(colorInput.value);
    }
    drawing = null;
    redraw();
  };
  canvas.addEventListener("pointerup", finishStroke);
  canvas.addEventListener("pointerleave", () => {
    if (drawing) finishStroke();
  });

  byId<HTMLButtonElement>("undo").addEventListener("click", () => {
    doc?.undo();
    redraw();
  });
  byId<HTMLButtonElement>("redo").addEventListener("click", () => {
    doc?.redo();
    redraw();
  });
  byId<HTMLButtonElement>("clear").addEventListener("click", () => {
    doc?.clearStrokes();
    redraw();
  });
  greyToggle.addEventListener("change", redraw);

  document.addEventListener("keydown", (event) => {
    if (!event.ctrlKey && !event.metaKey) return;
    if (event.key === "z") {
      doc?.undo();
      redraw();
      event.preventDefault();
    } else if (event.key === "y") {
      doc?.redo();
      redraw();
      event.preventDefault();
    }
  });

  byId<HTMLButtonElement>("submit").addEventListener("click", () => {
    if (!doc) {
      banner.textContent = "load a line art first";
      return;
    }
    const current = doc;
    queue.schedule(() => client.colorize(current));
  });
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  startEditor();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => startEditor());
}
