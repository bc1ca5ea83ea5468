// Thin typed client over the REST endpoints. The fetch implementation is
// injected so tests can run against a scripted server.

import type {
  ApiErrorBody,
  ConceptInfo,
  LoginResponse,
  ProgressView,
  SessionView,
  SubmissionResponse,
} from "./types.js";

export type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly phase?: string;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.phase = body.phase;
  }
}

export class ApiClient {
  private token: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await resp.json();
    if (!resp.ok) {
      const detail: ApiErrorBody = payload.detail ?? {
        code: "unknown",
        message: JSON.stringify(payload),
      };
      throw new ApiError(resp.status, detail);
    }
    return payload as T;
  }

  async login(username: string, password: string): Promise<LoginResponse> {
    const body = await this.request<LoginResponse>("POST", "/api/login", {
      username,
      password,
    });
    this.token = body.token;
    return body;
  }

  concepts(language: string): Promise<{ language: string; concepts: ConceptInfo[] }> {
    return this.request("GET", `/api/concepts?language=${encodeURIComponent(language)}`);
  }

  startConcept(conceptId: string, language: string): Promise<{
    phase: string;
    pretest_items: string[];
    current_exercise: string | null;
    next_concept_suggestion: string | null;
  }> {
    return this.request(
      "POST",
      `/api/concepts/${encodeURIComponent(conceptId)}/start?language=${encodeURIComponent(language)}`,
    );
  }

  submitPretest(codes: string[]): Promise<{ level: string; theta: number; first_exercise: string }> {
    return this.request("POST", "/api/pretest/submit", { codes });
  }

  current(locale: string): Promise<SessionView> {
    return this.request("GET", `/api/session/current?locale=${encodeURIComponent(locale)}`);
  }

  run(code: string): Promise<{ output: string }> {
    return this.request("POST", "/api/run", { code });
  }

  submit(code: string): Promise<SubmissionResponse> {
    return this.request("POST", "/api/submission", { code });
  }

  rate(rating: number): Promise<{ phase: string }> {
    return this.request("POST", "/api/feedback/agreement", { rating });
  }

  skipRating(): Promise<{ phase: string }> {
    return this.request("POST", "/api/feedback/agreement", { skip: true });
  }

  decide(choice: string): Promise<{ phase: string; exercise: string }> {
    return this.request("POST", "/api/recommendation/decision", { choice });
  }

  skipExercise(): Promise<{ exercise: string }> {
    return this.request("POST", "/api/skip");
  }

  progress(): Promise<ProgressView> {
    return this.request("GET", "/api/progress");
  }
}
