// Controller flow against a scripted stand-in server: the UI must follow the
// server's phases and verdicts exactly, never computing outcomes locally.

import { describe, expect, it } from "vitest";

import { ApiClient, type FetchLike } from "../src/api.js";
import { App, type InputReader } from "../src/app.js";
import type { Phase, SessionView, SubmissionResponse } from "../src/types.js";
import { findAll, renderApp } from "../src/views.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), { status });
}

class MockServer {
  phase: Phase = "NeedsPretest";
  exerciseId = "ex-a";
  submissions: string[] = [];
  ratings: unknown[] = [];
  decisions: string[] = [];
  repeated = false;
  verdictForNextSubmit = false; // server-side truth, independent of the code text

  fetch: FetchLike = async (url, init) => {
    const method = init.method ?? "GET";
    const path = url.split("?")[0]!;
    const body = init.body ? JSON.parse(init.body as string) : undefined;

    if (method === "POST" && path === "/api/login") {
      return jsonResponse(200, { token: "tok", mode: "hybrid", learner_id: "u1", locale: "en" });
    }
    if (method === "GET" && path === "/api/concepts") {
      return jsonResponse(200, {
        language: "python",
        concepts: [
          { id: "c0", name: "variables", order_index: 0, upper_concept: null, mastered: false },
        ],
      });
    }
    if (method === "POST" && path.startsWith("/api/concepts/")) {
      this.phase = "NeedsPretest";
      return jsonResponse(200, {
        phase: this.phase,
        pretest_items: ["p0", "p1", "p2"],
        current_exercise: null,
        next_concept_suggestion: null,
      });
    }
    if (method === "POST" && path === "/api/pretest/submit") {
      this.phase = "InExercise";
      return jsonResponse(200, { level: "Easy", theta: -1.0, first_exercise: this.exerciseId });
    }
    if (method === "GET" && path === "/api/session/current") {
      return jsonResponse(200, this.sessionView());
    }
    if (method === "GET" && path === "/api/progress") {
      return jsonResponse(200, {
        theta: -1.0,
        level: "Easy",
        progress_fraction: 0.5,
        solved_count: 0,
      });
    }
    if (method === "POST" && path === "/api/run") {
      return jsonResponse(200, { output: "echoed by server" });
    }
    if (method === "POST" && path === "/api/submission") {
      this.submissions.push(body.code);
      this.phase = "AwaitingAgreement";
      const response: SubmissionResponse = {
        phase: this.phase,
        classification: this.verdictForNextSubmit ? "Correct" : "Wrong",
        all_passed: this.verdictForNextSubmit,
        failed_cases: [],
        pending: this.pending(),
        mastered: false,
        next_concept_suggestion: null,
        degraded: false,
        feedback: {
          text: "server feedback",
          recommended_exercise_id: "ex-b",
          reason: "server reason",
          repeated: this.repeated,
          source: "GenAI",
        },
      };
      return jsonResponse(200, response);
    }
    if (method === "POST" && path === "/api/feedback/agreement") {
      this.ratings.push(body);
      this.phase = "AwaitingRecommendationDecision";
      return jsonResponse(200, { phase: this.phase });
    }
    if (method === "POST" && path === "/api/recommendation/decision") {
      this.decisions.push(body.choice);
      if (body.choice === "accept_genai" && this.repeated) {
        this.phase = "AwaitingRepeatDecision";
        return jsonResponse(200, { phase: this.phase, exercise: "ex-b" });
      }
      this.phase = "InExercise";
      this.exerciseId = "ex-b";
      return jsonResponse(200, { phase: this.phase, exercise: "ex-b" });
    }
    if (method === "POST" && path === "/api/skip") {
      this.exerciseId = "ex-c";
      return jsonResponse(200, { exercise: this.exerciseId });
    }
    return jsonResponse(404, { detail: { code: "not_found", message: path } });
  };

  private pending() {
    const offered =
      this.phase === "AwaitingRepeatDecision"
        ? ["repeat_genai", "use_adaptive"]
        : ["accept_genai", "use_adaptive", "decline_adaptive"];
    return {
      genai_candidate: "ex-b",
      reason: "server reason",
      adaptive_candidate: "ex-d",
      repeated: this.repeated,
      offered,
      source: "genai",
    };
  }

  private sessionView(): SessionView {
    return {
      phase: this.phase,
      language: "python",
      concept: "c0",
      pretest_items: this.phase === "NeedsPretest" ? ["p0", "p1", "p2"] : [],
      pretest:
        this.phase === "NeedsPretest"
          ? ["Easy", "Standard", "Difficult"].map((level, i) => ({
              id: `p${i}`,
              language: "python",
              level,
              statement: `${level} q`,
              locale_used: "en",
              locale_fallback: false,
              hints: [],
            }))
          : [],
      exercise:
        this.phase === "InExercise"
          ? {
              id: this.exerciseId,
              language: "python",
              level: "Easy",
              statement: "statement",
              locale_used: "en",
              locale_fallback: false,
              hints: [],
            }
          : null,
      pending: ["AwaitingRecommendationDecision", "AwaitingRepeatDecision"].includes(this.phase)
        ? this.pending()
        : null,
      feedback:
        this.phase === "NeedsPretest" || this.phase === "InExercise"
          ? null
          : {
              text: "server feedback",
              recommended_exercise_id: "ex-b",
              reason: "server reason",
              repeated: this.repeated,
              source: "GenAI",
            },
    };
  }
}

const inputs: InputReader = {
  code: () => "whatever the learner typed",
  pretestCodes: () => ["a", "b", "c"],
  credentials: () => ({ username: "u", password: "p" }),
};

function makeApp(server: MockServer): App {
  return new App(new ApiClient("", server.fetch), inputs);
}

describe("hybrid journey", () => {
  it("walks login -> concepts -> pretest -> exercise -> feedback -> decision", async () => {
    const server = new MockServer();
    const app = makeApp(server);

    await app.dispatch({ kind: "login", username: "u", password: "p" });
    expect(app.state.screen).toBe("concepts");
    expect(app.state.mode).toBe("hybrid");

    await app.dispatch({ kind: "select_concept", conceptId: "c0" });
    expect(app.state.screen).toBe("pretest");
    expect(app.state.pretest).toHaveLength(3);

    await app.dispatch({ kind: "submit_pretest" });
    expect(app.state.screen).toBe("exercise");
    expect(app.state.exercise!.id).toBe("ex-a");

    await app.dispatch({ kind: "submit" });
    expect(app.state.screen).toBe("feedback");
    expect(app.state.phase).toBe("AwaitingAgreement");
    expect(server.submissions).toEqual(["whatever the learner typed"]);

    await app.dispatch({ kind: "rate", rating: 5 });
    expect(server.ratings).toEqual([{ rating: 5 }]);
    expect(app.state.phase).toBe("AwaitingRecommendationDecision");

    await app.dispatch({ kind: "decide", choice: "use_adaptive" });
    expect(server.decisions).toEqual(["use_adaptive"]);
    expect(app.state.screen).toBe("exercise");
    expect(app.state.exercise!.id).toBe("ex-b");
  });

  it("shows the repeat modal only after the server enters the repeat phase", async () => {
    const server = new MockServer();
    server.repeated = true;
    const app = makeApp(server);
    await app.dispatch({ kind: "login", username: "u", password: "p" });
    await app.dispatch({ kind: "select_concept", conceptId: "c0" });
    await app.dispatch({ kind: "submit_pretest" });
    await app.dispatch({ kind: "submit" });
    await app.dispatch({ kind: "rate", rating: 3 });

    let tree = renderApp(app.state);
    expect(findAll(tree, (n) => n.attrs?.id === "repeat-modal")).toHaveLength(0);

    await app.dispatch({ kind: "decide", choice: "accept_genai" });
    expect(app.state.phase).toBe("AwaitingRepeatDecision");
    tree = renderApp(app.state);
    expect(findAll(tree, (n) => n.attrs?.id === "repeat-modal")).toHaveLength(1);
    const offered = findAll(tree, (n) => n.attrs?.["data-choice"] !== undefined).map(
      (n) => n.attrs!["data-choice"],
    );
    expect(offered).toEqual(["repeat_genai", "use_adaptive"]);
  });

  it("displays the server verdict, not anything computed from the code", async () => {
    const server = new MockServer();
    const app = makeApp(server);
    await app.dispatch({ kind: "login", username: "u", password: "p" });
    await app.dispatch({ kind: "select_concept", conceptId: "c0" });
    await app.dispatch({ kind: "submit_pretest" });

    server.verdictForNextSubmit = false;
    await app.dispatch({ kind: "submit" });
    expect(app.state.allPassed).toBe(false);

    await app.dispatch({ kind: "rate", rating: 1 });
    await app.dispatch({ kind: "decide", choice: "use_adaptive" });

    // same learner input, server now says it passes: the UI follows the server
    server.verdictForNextSubmit = true;
    await app.dispatch({ kind: "submit" });
    expect(app.state.allPassed).toBe(true);
  });

  it("run output is whatever the server returned", async () => {
    const server = new MockServer();
    const app = makeApp(server);
    await app.dispatch({ kind: "login", username: "u", password: "p" });
    await app.dispatch({ kind: "select_concept", conceptId: "c0" });
    await app.dispatch({ kind: "submit_pretest" });
    await app.dispatch({ kind: "run" });
    expect(app.state.lastRunOutput).toBe("echoed by server");
  });

  it("skip swaps in the server-chosen exercise", async () => {
    const server = new MockServer();
    const app = makeApp(server);
    await app.dispatch({ kind: "login", username: "u", password: "p" });
    await app.dispatch({ kind: "select_concept", conceptId: "c0" });
    await app.dispatch({ kind: "submit_pretest" });
    await app.dispatch({ kind: "try_other" });
    expect(app.state.exercise!.id).toBe("ex-c");
  });

  it("recovers from a wrong-phase conflict by resyncing with the server", async () => {
    const server = new MockServer();
    const app = makeApp(server);
    await app.dispatch({ kind: "login", username: "u", password: "p" });
    await app.dispatch({ kind: "select_concept", conceptId: "c0" });
    await app.dispatch({ kind: "submit_pretest" });
    // the learner tries to decide while the server is still in the exercise phase
    server.phase = "InExercise";
    const conflictFetch: FetchLike = async (url, init) => {
      if ((init.method ?? "GET") === "POST" && url.startsWith("/api/recommendation/decision")) {
        return jsonResponse(409, {
          detail: { code: "wrong_phase", message: "bad phase", phase: "InExercise" },
        });
      }
      return server.fetch(url, init);
    };
    const conflictedApp = new App(new ApiClient("", conflictFetch), inputs);
    await conflictedApp.dispatch({ kind: "login", username: "u", password: "p" });
    await conflictedApp.dispatch({ kind: "select_concept", conceptId: "c0" });
    await conflictedApp.dispatch({ kind: "submit_pretest" });
    await conflictedApp.dispatch({ kind: "decide", choice: "use_adaptive" });
    expect(conflictedApp.state.error).toContain("wrong_phase");
    expect(conflictedApp.state.screen).toBe("exercise");
  });
});
