import { describe, expect, it } from "vitest";

import type { Choice, PendingView } from "../src/types.js";
import {
  AppState,
  agreementWidget,
  decisionButtons,
  findAll,
  initialState,
  renderApp,
  textOf,
} from "../src/views.js";

function pending(offered: Choice[], repeated = false): PendingView {
  return {
    genai_candidate: "py-cond-s1",
    reason: "targets the same knowledge points",
    adaptive_candidate: "py-cond-e2",
    repeated,
    offered,
    source: "genai",
  };
}

function feedbackState(overrides: Partial<AppState>): AppState {
  return {
    ...initialState(),
    screen: "feedback",
    mode: "hybrid",
    phase: "AwaitingRecommendationDecision",
    feedback: {
      text: "Your submitted code is correct.",
      recommended_exercise_id: "py-cond-s1",
      reason: "targets the same knowledge points",
      repeated: false,
      source: "GenAI",
    },
    pending: pending(["accept_genai", "use_adaptive", "decline_adaptive"]),
    ...overrides,
  };
}

function renderedChoices(state: AppState): string[] {
  const tree = renderApp(state);
  return findAll(tree, (n) => n.attrs?.["data-choice"] !== undefined).map(
    (n) => n.attrs!["data-choice"]!,
  );
}

describe("decision buttons", () => {
  it("renders exactly the offered set for the hybrid screen, in order", () => {
    const state = feedbackState({});
    expect(renderedChoices(state)).toEqual(["accept_genai", "use_adaptive", "decline_adaptive"]);
  });

  it("renders a single button when only one option is offered", () => {
    const state = feedbackState({
      mode: "genai",
      pending: pending(["accept_genai"]),
    });
    expect(renderedChoices(state)).toEqual(["accept_genai"]);
  });

  it("never renders a button that is not offered", () => {
    const state = feedbackState({ pending: pending(["use_adaptive"]) });
    const choices = renderedChoices(state);
    expect(choices).toEqual(["use_adaptive"]);
    expect(choices).not.toContain("accept_genai");
  });

  it("maps every button to a decide action for its own choice", () => {
    const node = decisionButtons(pending(["accept_genai", "use_adaptive"]));
    const buttons = findAll(node, (n) => n.tag === "button");
    expect(buttons.map((b) => b.action)).toEqual([
      { kind: "decide", choice: "accept_genai" },
      { kind: "decide", choice: "use_adaptive" },
    ]);
  });
});

describe("repeat modal", () => {
  it("appears when the server put the session into the repeat-decision phase", () => {
    const state = feedbackState({
      phase: "AwaitingRepeatDecision",
      pending: pending(["repeat_genai", "use_adaptive"], true),
    });
    const tree = renderApp(state);
    const modals = findAll(tree, (n) => n.attrs?.id === "repeat-modal");
    expect(modals).toHaveLength(1);
    expect(textOf(modals[0]!)).toContain("Do you wish to repeat it?");
    expect(renderedChoices(state)).toEqual(["repeat_genai", "use_adaptive"]);
  });

  it("does not appear for a non-repeated recommendation", () => {
    const state = feedbackState({});
    expect(state.pending!.repeated).toBe(false);
    const tree = renderApp(state);
    expect(findAll(tree, (n) => n.attrs?.id === "repeat-modal")).toHaveLength(0);
  });
});

describe("agreement widget", () => {
  it("posts ratings 1 through 5", () => {
    const widget = agreementWidget();
    const ratings = findAll(widget, (n) => n.attrs?.["data-rating"] !== undefined).map(
      (n) => n.action,
    );
    expect(ratings).toEqual([
      { kind: "rate", rating: 1 },
      { kind: "rate", rating: 2 },
      { kind: "rate", rating: 3 },
      { kind: "rate", rating: 4 },
      { kind: "rate", rating: 5 },
    ]);
  });

  it("offers a skip escape", () => {
    const widget = agreementWidget();
    const skip = findAll(widget, (n) => n.attrs?.id === "skip-rating");
    expect(skip).toHaveLength(1);
    expect(skip[0]!.action).toEqual({ kind: "skip_rating" });
  });

  it("is rendered while the server awaits the agreement", () => {
    const state = feedbackState({ phase: "AwaitingAgreement", pending: null });
    const tree = renderApp(state);
    expect(findAll(tree, (n) => n.attrs?.id === "agreement")).toHaveLength(1);
  });

  it("is absent in adaptive mode", () => {
    const state = feedbackState({
      mode: "adaptive",
      phase: "AwaitingRecommendationDecision",
      feedback: null,
      allPassed: true,
      pending: {
        genai_candidate: null,
        reason: null,
        adaptive_candidate: "py-var-e1",
        repeated: false,
        offered: ["accept_adaptive"],
        source: "adaptive",
      },
    });
    const tree = renderApp(state);
    expect(findAll(tree, (n) => n.attrs?.id === "agreement")).toHaveLength(0);
    expect(renderedChoices(state)).toEqual(["accept_adaptive"]);
  });
});

describe("adaptive feedback panel", () => {
  it("shows only the failed cases the server sent", () => {
    const state = feedbackState({
      mode: "adaptive",
      phase: "InExercise",
      allPassed: false,
      feedback: null,
      pending: null,
      failedCases: [
        {
          case_index: 1,
          inputs: ["5", "3"],
          expected_output: ["False"],
          actual_output: "∅ (no output)",
        },
      ],
    });
    const tree = renderApp(state);
    const cases = findAll(tree, (n) => n.attrs?.class === "failed-case");
    expect(cases).toHaveLength(1);
    expect(textOf(cases[0]!)).toContain("False");
    expect(textOf(cases[0]!)).toContain("∅ (no output)");
    expect(findAll(tree, (n) => n.attrs?.id === "agreement")).toHaveLength(0);
  });

  it("renders the display purely from the payload (no client grading)", () => {
    // identical submission content, opposite verdicts from the server:
    // the view must follow the server verdict alone
    const failing = feedbackState({
      mode: "adaptive",
      phase: "InExercise",
      allPassed: false,
      feedback: null,
      pending: null,
      failedCases: [
        { case_index: 0, inputs: [], expected_output: ["1"], actual_output: "2" },
      ],
    });
    const passing = feedbackState({
      mode: "adaptive",
      phase: "AwaitingRecommendationDecision",
      allPassed: true,
      feedback: null,
      failedCases: [],
      pending: {
        genai_candidate: null,
        reason: null,
        adaptive_candidate: "x",
        repeated: false,
        offered: ["accept_adaptive"],
        source: "adaptive",
      },
    });
    expect(textOf(renderApp(failing))).toContain("your code will not be correct");
    expect(textOf(renderApp(passing))).toContain("You have completed all testcases");
  });
});

describe("exercise screen", () => {
  function exerciseState(overrides: Partial<AppState> = {}): AppState {
    return {
      ...initialState(),
      screen: "exercise",
      mode: "adaptive",
      phase: "InExercise",
      exercise: {
        id: "py-var-d1",
        language: "python",
        level: "Standard",
        statement: "Write a program that calculates the area of a triangle.",
        locale_used: "en",
        locale_fallback: false,
        hints: [{ concept: "arithmetic_operators", points: ["Multiplication", "Division"] }],
      },
      progress: { theta: 0.0, level: "Standard", progress_fraction: 0.5, solved_count: 2 },
      ...overrides,
    };
  }

  it("renders the progress bar at the API fraction", () => {
    const tree = renderApp(exerciseState());
    const fills = findAll(tree, (n) => n.attrs?.["data-fraction"] !== undefined);
    expect(fills).toHaveLength(1);
    expect(fills[0]!.attrs!["data-fraction"]).toBe("50");
  });

  it("shows hints, level badge and the three actions", () => {
    const tree = renderApp(exerciseState());
    expect(textOf(tree)).toContain("STANDARD LEVEL");
    expect(textOf(tree)).toContain("arithmetic_operators");
    for (const id of ["run", "submit", "try-other"]) {
      expect(findAll(tree, (n) => n.attrs?.id === id)).toHaveLength(1);
    }
  });

  it("marks a locale fallback", () => {
    const tree = renderApp(
      exerciseState({
        exercise: {
          ...exerciseState().exercise!,
          locale_used: "en",
          locale_fallback: true,
        },
      }),
    );
    expect(textOf(tree)).toContain("no translation available");
  });
});

describe("pretest screen", () => {
  it("renders three editors, one per level label", () => {
    const state: AppState = {
      ...initialState(),
      screen: "pretest",
      phase: "NeedsPretest",
      pretest: ["Easy", "Standard", "Difficult"].map((level, i) => ({
        id: `p${i}`,
        language: "python",
        level,
        statement: `${level} question text`,
        locale_used: "en",
        locale_fallback: false,
        hints: [],
      })),
    };
    const tree = renderApp(state);
    const editors = findAll(tree, (n) => n.tag === "textarea");
    expect(editors).toHaveLength(3);
    expect(editors.map((e) => e.attrs!["data-level"])).toEqual([
      "Easy",
      "Standard",
      "Difficult",
    ]);
    expect(findAll(tree, (n) => n.attrs?.id === "pretest-submit")).toHaveLength(1);
  });
});

describe("concept completion", () => {
  it("shows the suggestion banner with accept and choose-manually", () => {
    const state: AppState = {
      ...initialState(),
      screen: "complete",
      suggestion: "py-loops",
    };
    const tree = renderApp(state);
    expect(textOf(tree)).toContain("Suggested next concept: py-loops");
    const accept = findAll(
      tree,
      (n) => n.action?.kind === "select_concept" && n.action.conceptId === "py-loops",
    );
    expect(accept).toHaveLength(1);
    const manual = findAll(tree, (n) => n.action?.kind === "continue_next");
    expect(manual).toHaveLength(1);
  });
});
