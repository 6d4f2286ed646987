// Thin client over the operator API. fetch and EventSource come in through
// the constructor so tests can substitute fakes.

import type {
  ApiTagView,
  ControlRequest,
  ControlResult,
  LogsResponse,
  SessionInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

export interface StreamSource {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export type StreamFactory = (url: string) => StreamSource;
export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface GridApi {
  sessions(): Promise<SessionInfo[]>;
  tags(session?: string): Promise<ApiTagView[]>;
  logs(): Promise<LogsResponse>;
  control(request: ControlRequest): Promise<ControlResult>;
  stream(onDeltas: (views: ApiTagView[]) => void, onDrop: () => void): () => void;
}

export class ApiClient implements GridApi {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
    private streamFactory: StreamFactory = (url) =>
      new EventSource(url) as unknown as StreamSource,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`);
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as T;
  }

  sessions(): Promise<SessionInfo[]> {
    return this.getJson("/api/sessions");
  }

  tags(session?: string): Promise<ApiTagView[]> {
    const query = session ? `?session=${encodeURIComponent(session)}` : "";
    return this.getJson(`/api/tags${query}`);
  }

  logs(): Promise<LogsResponse> {
    return this.getJson("/api/logs");
  }

  async control(request: ControlRequest): Promise<ControlResult> {
    const response = await this.fetchFn(`${this.base}/api/control`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        detail = JSON.parse(text).detail ?? text;
      } catch {
        // keep raw body
      }
      throw new ApiError(response.status, `${response.status}: ${detail}`);
    }
    return JSON.parse(text) as ControlResult;
  }

  stream(onDeltas: (views: ApiTagView[]) => void, onDrop: () => void): () => void {
    const source = this.streamFactory(`${this.base}/api/stream`);
    source.onmessage = (event) => {
      try {
        onDeltas(JSON.parse(event.data) as ApiTagView[]);
      } catch {
        // ignore malformed push payloads
      }
    };
    source.onerror = () => onDrop();
    return () => source.close();
  }
}
