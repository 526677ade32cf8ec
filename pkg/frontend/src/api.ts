/** Typed client for the segmentation service HTTP API. */

export interface LevelMeta {
  level: number;
  height: number;
  width: number;
}

export interface SessionInfo {
  id: string;
  source_id: string;
  levels: LevelMeta[];
}

export interface PromptPayload {
  points?: [number, number][];
  labels?: number[];
  box?: [number, number, number, number];
}

export interface PredictRequest {
  center_world: [number, number];
  patch_size?: number;
  hr_level?: number;
  prompts: PromptPayload;
}

export interface Extent {
  r0: number;
  c0: number;
  r1: number;
  c1: number;
}

export interface PredictResponse {
  hr_mask_rle: number[];
  lr_mask_rle: number[];
  mask_shape: [number, number];
  hr_extent: Extent;
  lr_extent: Extent;
  iou_estimate: number;
  latency_ms: number;
}

export interface SyntheticSpec {
  n_objects?: number;
  seed?: number;
  image_size?: number;
  n_levels?: number;
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      const detail = await resp.text();
      throw new Error(`${path} failed (${resp.status}): ${detail}`);
    }
    return (await resp.json()) as T;
  }

  createSyntheticSession(spec: SyntheticSpec): Promise<SessionInfo> {
    return this.post<SessionInfo>("/sessions", { synthetic: spec });
  }

  predict(sessionId: string, req: PredictRequest): Promise<PredictResponse> {
    return this.post<PredictResponse>(`/sessions/${sessionId}/predict`, req);
  }

  tileUrl(sessionId: string, level: number, row: number, col: number): string {
    return `${this.baseUrl}/sessions/${sessionId}/tile?level=${level}&row=${row}&col=${col}`;
  }

  async health(): Promise<{ status: string; patch_size: number }> {
    const resp = await this.fetchFn(`${this.baseUrl}/healthz`);
    if (!resp.ok) throw new Error(`health check failed: ${resp.status}`);
    return (await resp.json()) as { status: string; patch_size: number };
  }
}
