/** Thin typed client for the review service; the only place the UI touches
 * the network, so tests can count and stub requests. */

import type {
  ApiErrorBody,
  CallRecordDto,
  DetectResponse,
  DetectionParams,
  ReviewPage,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let body: ApiErrorBody = { code: "error", message: `HTTP ${response.status}` };
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        // non-JSON error body; keep the fallback
      }
      throw new ApiError(response.status, body.code, body.message);
    }
    return (await response.json()) as T;
  }

  listRecordings(): Promise<string[]> {
    return this.request<string[]>("/api/recordings");
  }

  detect(recordingId: string, params?: Partial<DetectionParams>): Promise<DetectResponse> {
    return this.request<DetectResponse>("/api/detect", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ recording_id: recordingId, params: params ?? null }),
    });
  }

  review(status: string, page = 0, pageSize = 50): Promise<ReviewPage> {
    const query = new URLSearchParams({
      status,
      page: String(page),
      page_size: String(pageSize),
    });
    return this.request<ReviewPage>(`/api/review?${query}`);
  }

  label(
    callId: string,
    callClass: string,
    annotator: string,
    version?: number,
  ): Promise<CallRecordDto> {
    return this.request<CallRecordDto>(`/api/calls/${encodeURIComponent(callId)}/label`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ call_class: callClass, annotator, version: version ?? null }),
    });
  }

  spectrogramUrl(recordingId: string, t0: number, t1: number): string {
    const query = new URLSearchParams({ t0: String(t0), t1: String(t1) });
    return `${this.baseUrl}/api/recordings/${encodeURIComponent(recordingId)}/spectrogram?${query}`;
  }

  getConfig(): Promise<Record<string, unknown>> {
    return this.request("/api/config");
  }

  putConfig(config: Record<string, unknown>): Promise<Record<string, unknown>> {
    return this.request("/api/config", {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
  }
}
