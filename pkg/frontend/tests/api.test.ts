import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, type FetchLike } from "../src/api.js";

interface RecordedCall {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: unknown;
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function scriptedFetch(
  routes: Record<string, (call: RecordedCall) => Response>,
): { fetch: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetch: FetchLike = async (url, init) => {
    const call: RecordedCall = {
      url,
      method: init.method ?? "GET",
      headers: (init.headers ?? {}) as Record<string, string>,
      body: init.body ? JSON.parse(init.body as string) : undefined,
    };
    calls.push(call);
    const key = `${call.method} ${url.split("?")[0]}`;
    const handler = routes[key];
    if (!handler) {
      return jsonResponse(404, { detail: { code: "not_found", message: key } });
    }
    return handler(call);
  };
  return { fetch, calls };
}

describe("ApiClient", () => {
  it("stores the login token and sends it as a bearer header afterwards", async () => {
    const { fetch, calls } = scriptedFetch({
      "POST /api/login": () =>
        jsonResponse(200, { token: "t-123", mode: "hybrid", learner_id: "u1", locale: "en" }),
      "GET /api/progress": () =>
        jsonResponse(200, { theta: 0, level: "Standard", progress_fraction: 0.5, solved_count: 0 }),
    });
    const client = new ApiClient("", fetch);
    const session = await client.login("ada", "pw");
    expect(session.mode).toBe("hybrid");
    await client.progress();
    expect(calls[1]!.headers["Authorization"]).toBe("Bearer t-123");
  });

  it("sends the documented request bodies", async () => {
    const { fetch, calls } = scriptedFetch({
      "POST /api/submission": () =>
        jsonResponse(200, {
          phase: "InExercise",
          classification: "Wrong",
          all_passed: false,
          failed_cases: [],
          pending: null,
          mastered: false,
          next_concept_suggestion: null,
          degraded: false,
        }),
      "POST /api/feedback/agreement": () => jsonResponse(200, { phase: "x" }),
      "POST /api/recommendation/decision": () =>
        jsonResponse(200, { phase: "InExercise", exercise: "e1" }),
      "POST /api/pretest/submit": () =>
        jsonResponse(200, { level: "Easy", theta: -1, first_exercise: "e0" }),
    });
    const client = new ApiClient("", fetch);
    client.setToken("t");
    await client.submit("print(1)");
    await client.rate(4);
    await client.skipRating();
    await client.decide("use_adaptive");
    await client.submitPretest(["a", "b", "c"]);
    expect(calls.map((c) => c.body)).toEqual([
      { code: "print(1)" },
      { rating: 4 },
      { skip: true },
      { choice: "use_adaptive" },
      { codes: ["a", "b", "c"] },
    ]);
  });

  it("surfaces structured errors with status, code and phase", async () => {
    const { fetch } = scriptedFetch({
      "POST /api/skip": () =>
        jsonResponse(409, {
          detail: { code: "wrong_phase", message: "not now", phase: "AwaitingAgreement" },
        }),
    });
    const client = new ApiClient("", fetch);
    client.setToken("t");
    let caught: ApiError | null = null;
    try {
      await client.skipExercise();
    } catch (err) {
      caught = err as ApiError;
    }
    expect(caught).not.toBeNull();
    expect(caught!.status).toBe(409);
    expect(caught!.code).toBe("wrong_phase");
    expect(caught!.phase).toBe("AwaitingAgreement");
  });

  it("encodes locale and language query parameters", async () => {
    const { fetch, calls } = scriptedFetch({
      "GET /api/session/current": () =>
        jsonResponse(200, {
          phase: "InExercise",
          language: "python",
          concept: "c",
          pretest_items: [],
          exercise: null,
          pending: null,
          feedback: null,
        }),
      "GET /api/concepts": () => jsonResponse(200, { language: "c#", concepts: [] }),
    });
    const client = new ApiClient("", fetch);
    client.setToken("t");
    await client.current("th");
    await client.concepts("c#");
    expect(calls[0]!.url).toBe("/api/session/current?locale=th");
    expect(calls[1]!.url).toBe("/api/concepts?language=c%23");
  });
});
