/**
 * Typed client for the annotation service JSON API.
 *
 * Every number the UI displays comes from these endpoints; the client never
 * computes labels or metrics itself. Raw response text is kept for the
 * report endpoints so the dashboard can show server values verbatim.
 */

export interface UiConfig {
  api_base_url: string;
  tile_url_template: string | null;
}

export interface TrackFilters {
  label?: string;
  annotator?: string;
  runway?: string;
  verified?: boolean;
  set?: number;
  bbox?: [number, number, number, number];
  limit?: number;
  offset?: number;
}

/** One position report: [timestamp_s, latitude, longitude, altitude_m]. */
export type TrackPointRow = [number, number, number, number];

export interface AnnotationInfo {
  label: string;
  annotator: string;
  verified: boolean;
}

export interface SubjectGeometry {
  track_id: string;
  points: TrackPointRow[];
  annotations: AnnotationInfo[];
  runway_id?: string | null;
  set_index?: number | null;
  parent_track_id?: string;
}

export interface QueryResult {
  ids: string[];
  total: number;
  tracks?: SubjectGeometry[];
}

export interface EvalReportDoc {
  accuracy: number;
  class_names: string[];
  precision: Record<string, number>;
  recall: Record<string, number>;
  f1: Record<string, number>;
  confusion: number[][];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  token: string | null = null;
  onUnauthorized: (() => void) | null = null;

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
    raw = false,
  ): Promise<any> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let payload: string | undefined;
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: payload,
    });
    if (!response.ok) {
      let code = "internal";
      let message = response.statusText;
      try {
        const doc = await response.json();
        code = doc.code ?? code;
        message = doc.message ?? message;
      } catch {
        // non-JSON error body: keep the status text
      }
      if (response.status === 401 && this.onUnauthorized) this.onUnauthorized();
      throw new ApiError(response.status, code, message);
    }
    return raw ? response.text() : response.json();
  }

  async login(username: string, password: string): Promise<void> {
    const doc = await this.request("POST", "/api/auth/login", {
      username,
      password,
    });
    this.token = doc.token;
  }

  getProject(project: string) {
    return this.request("GET", `/api/projects/${encodeURIComponent(project)}`);
  }

  static filterParams(filters: TrackFilters): string {
    const params = new URLSearchParams();
    if (filters.label !== undefined) params.set("label", filters.label);
    if (filters.annotator !== undefined) params.set("annotator", filters.annotator);
    if (filters.runway !== undefined) params.set("runway", filters.runway);
    if (filters.verified !== undefined) params.set("verified", String(filters.verified));
    if (filters.set !== undefined) params.set("set", String(filters.set));
    if (filters.bbox !== undefined) params.set("bbox", filters.bbox.join(","));
    if (filters.limit !== undefined) params.set("limit", String(filters.limit));
    if (filters.offset !== undefined) params.set("offset", String(filters.offset));
    return params.toString();
  }

  queryTracks(
    project: string,
    filters: TrackFilters,
    includeGeometry = false,
  ): Promise<QueryResult> {
    let query = ApiClient.filterParams(filters);
    if (includeGeometry) query += (query ? "&" : "") + "include=geometry";
    const suffix = query ? `?${query}` : "";
    return this.request(
      "GET",
      `/api/projects/${encodeURIComponent(project)}/tracks${suffix}`,
    );
  }

  getTrack(project: string, subjectId: string) {
    return this.request(
      "GET",
      `/api/projects/${encodeURIComponent(project)}/tracks/${encodeURIComponent(subjectId)}`,
    );
  }

  annotate(project: string, subject: string, label: string) {
    return this.request(
      "POST",
      `/api/projects/${encodeURIComponent(project)}/annotations`,
      { subject, label },
    );
  }

  batchAnnotate(
    project: string,
    query: Record<string, unknown>,
    label: string,
  ): Promise<{ count: number }> {
    return this.request(
      "POST",
      `/api/projects/${encodeURIComponent(project)}/annotations/batch`,
      { query, label },
    );
  }

  listModels(project: string): Promise<{ models: string[] }> {
    return this.request(
      "GET",
      `/api/projects/${encodeURIComponent(project)}/models`,
    );
  }

  /** Raw JSON text so displayed metrics match the server byte for byte. */
  metricsText(project: string, model: string, set?: number): Promise<string> {
    const suffix = set !== undefined ? `?set=${set}` : "";
    return this.request(
      "GET",
      `/api/projects/${encodeURIComponent(project)}/models/${encodeURIComponent(model)}/metrics${suffix}`,
      undefined,
      true,
    );
  }

  /** Raw effort CSV, verbatim from the server. */
  effortReport(project: string): Promise<string> {
    return this.request(
      "GET",
      `/api/projects/${encodeURIComponent(project)}/reports/effort`,
      undefined,
      true,
    );
  }
}

export async function loadConfig(
  url = "./config.json",
  fetchImpl: FetchLike = (input, init) => fetch(input, init),
): Promise<UiConfig> {
  const response = await fetchImpl(url);
  if (!response.ok) throw new Error(`cannot load UI config from ${url}`);
  const doc = await response.json();
  return {
    api_base_url: doc.api_base_url ?? "",
    tile_url_template: doc.tile_url_template ?? null,
  };
}
