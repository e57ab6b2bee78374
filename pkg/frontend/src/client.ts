/** HTTP client for the colorization service.
 *
 * Talks only to the documented endpoints: multipart POST /v1/colorize,
 * GET /v1/models, GET /healthz. Service errors are surfaced verbatim.
 */

import type { StrokeDocument } from "./document.js";
import { rasterizeStrokes } from "./raster.js";
import { encodePng } from "./png.js";

export interface ColorizeResult {
  image: Uint8Array;
  modelId: string;
  requestId: string;
  timingMs: number;
}

export interface ModelInfo {
  model_id: string;
  iteration: number;
  image_side: number;
  generator_width: number;
}

export interface Health {
  status: string;
  available: number;
  loaded: string[];
}

export class ServiceError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`service answered ${status}: ${detail}`);
    this.name = "ServiceError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  const text = await response.text();
  try {
    const body = JSON.parse(text);
    if (typeof body?.detail === "string") return body.detail;
  } catch {
    // not JSON: fall through to the raw text
  }
  return text || response.statusText;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  /** Submit a document. Documents without strokes request automatic
   * colorization: no strokes part is sent at all. */
  async colorize(doc: StrokeDocument, modelId?: string): Promise<ColorizeResult> {
    const form = new FormData();
    form.append("line_art", new Blob([doc.lineArt as BlobPart], { type: "image/png" }), "line_art.png");
    if (doc.strokeCount > 0) {
      const strokesPng = await encodePng(rasterizeStrokes(doc), doc.width, doc.height);
      form.append("strokes", new Blob([strokesPng as BlobPart], { type: "image/png" }), "strokes.png");
    }
    if (modelId !== undefined) {
      form.append("model_id", modelId);
    }
    const response = await this.fetchImpl(`${this.baseUrl}/v1/colorize`, {
      method: "POST",
      body: form,
    });
    if (!response.ok) {
      throw new ServiceError(response.status, await errorDetail(response));
    }
    return {
      image: new Uint8Array(await response.arrayBuffer()),
      modelId: response.headers.get("X-Model-Id") ?? "",
      requestId: response.headers.get("X-Request-Id") ?? "",
      timingMs: Number(response.headers.get("X-Timing-Ms") ?? "0"),
    };
  }

  async models(): Promise<ModelInfo[]> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/models`);
    if (!response.ok) {
      throw new ServiceError(response.status, await errorDetail(response));
    }
    const body = await response.json();
    return body.models;
  }

  async health(): Promise<Health> {
    const response = await this.fetchImpl(`${this.baseUrl}/healthz`);
    if (!response.ok) {
      throw new ServiceError(response.status, await errorDetail(response));
    }
    return response.json();
  }
}

/** At most one submit in flight; a newer request supersedes any queued one. */
export class SubmitQueue<T> {
  private inFlight = false;
  private pending: (() => Promise<T>) | null = null;

  constructor(
    private readonly onResult: (result: T) => void,
    private readonly onError: (error: unknown) => void,
  ) {}

  schedule(task: () => Promise<T>): void {
    if (this.inFlight) {
      this.pending = task; // supersedes anything already waiting
      return;
    }
    this.run(task);
  }

  get busy(): boolean {
    return this.inFlight;
  }

  private run(task: () => Promise<T>): void {
    this.inFlight = true;
    task()
      .then((result) => this.onResult(result))
      .catch((error) => this.onError(error))
      .finally(() => {
        this.inFlight = false;
        const next = this.pending;
        this.pending = null;
        if (next) this.run(next);
      });
  }
}
