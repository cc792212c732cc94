/**
 * Typed client for the promptware service. The UI talks to the service
 * exclusively through this module; it never builds prompt text itself.
 */

export interface Choice {
  value: string;
  label: string;
}

export interface SlotSpec {
  name: string;
  label: string;
  kind: "single_choice" | "free_text";
  choices?: Choice[];
  default?: string;
}

export interface TemplateInfo {
  id: string;
  name: string;
  version: number;
  slots: SlotSpec[];
}

export interface StaticInfo {
  id: string;
  label: string;
}

export interface Provenance {
  mode: string;
  source_id: string | null;
  version: number | null;
}

export interface ResolvedPrompt {
  text: string;
  provenance: Provenance;
}

export interface ValidationItem {
  code: string;
  slot: string;
  message: string;
  value?: string;
}

export interface CompletionInfo {
  text: string;
  attempts: number;
  latency: number;
  provider: { kind: string; model: string };
}

export interface JobInfo {
  job_id: string;
  state: string;
  mode: string;
  resolved: ResolvedPrompt;
  result: CompletionInfo | null;
  error?: { code: string; message: string };
}

export interface HealthInfo {
  status: string;
  pack_version: number | null;
  provider_kind: string;
}

export type PromptRequestBody =
  | { mode: "template"; template_id: string; selection: Record<string, string> }
  | { mode: "freeform"; freeform_text: string }
  | { mode: "static"; static_id: string };

/** Service-reported failure; carries the machine-readable error code. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly items: ValidationItem[];

  constructor(status: number, code: string, message: string, items: ValidationItem[] = []) {
    super(message);
    this.status = status;
    this.code = code;
    this.items = items;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(
    path: string,
    init?: RequestInit & { signal?: AbortSignal },
  ): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const body = await response.json();
    if (!response.ok) {
      const code = typeof body?.error === "string" ? body.error : "E_UNKNOWN";
      const message = typeof body?.message === "string" ? body.message : response.statusText;
      throw new ApiError(response.status, code, message, body?.items ?? []);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown, signal?: AbortSignal): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
      signal,
    });
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/api/health");
  }

  templates(): Promise<TemplateInfo[]> {
    return this.request<TemplateInfo[]>("/api/templates");
  }

  statics(): Promise<StaticInfo[]> {
    return this.request<StaticInfo[]>("/api/statics");
  }

  preview(body: PromptRequestBody, signal?: AbortSignal): Promise<ResolvedPrompt> {
    return this.post<ResolvedPrompt>("/api/preview", body, signal);
  }

  async feedback(body: PromptRequestBody): Promise<JobInfo> {
    const wrapped = await this.post<{ job: JobInfo }>("/api/feedback", body);
    return wrapped.job;
  }

  reload(): Promise<{ pack_version: number }> {
    return this.post<{ pack_version: number }>("/api/reload", {});
  }
}
