// Pure view layer: application state in, a plain node tree out.
// No correctness checks, no recommendation logic; every displayed verdict and
// every available action comes from the last server response, and decision
// buttons are generated 1:1 from the server's `offered` list.

import type {
  Choice,
  ConceptInfo,
  ExerciseView,
  FailedCase,
  FeedbackView,
  Mode,
  PendingView,
  Phase,
  ProgressView,
} from "./types.js";

export type Action =
  | { kind: "login"; username: string; password: string }
  | { kind: "select_concept"; conceptId: string }
  | { kind: "submit_pretest" }
  | { kind: "run" }
  | { kind: "submit" }
  | { kind: "try_other" }
  | { kind: "rate"; rating: number }
  | { kind: "skip_rating" }
  | { kind: "decide"; choice: Choice }
  | { kind: "toggle_locale" }
  | { kind: "continue_next" };

export interface UiNode {
  tag: string;
  attrs?: Record<string, string>;
  children?: Array<UiNode | string>;
  action?: Action;
}

export function el(
  tag: string,
  attrs?: Record<string, string>,
  children?: Array<UiNode | string>,
  action?: Action,
): UiNode {
  return { tag, attrs, children, action };
}

export interface AppState {
  screen: "login" | "concepts" | "pretest" | "exercise" | "feedback" | "complete";
  mode: Mode | null;
  locale: string;
  language: string;
  error: string | null;
  concepts: ConceptInfo[];
  suggestion: string | null;
  pretest: ExerciseView[];
  exercise: ExerciseView | null;
  progress: ProgressView | null;
  lastRunOutput: string | null;
  phase: Phase | null;
  feedback: FeedbackView | null;
  failedCases: FailedCase[];
  allPassed: boolean | null;
  pending: PendingView | null;
  degradedNotice: boolean;
  busy: boolean;
}

export function initialState(): AppState {
  return {
    screen: "login",
    mode: null,
    locale: "en",
    language: "python",
    error: null,
    concepts: [],
    suggestion: null,
    pretest: [],
    exercise: null,
    progress: null,
    lastRunOutput: null,
    phase: null,
    feedback: null,
    failedCases: [],
    allPassed: null,
    pending: null,
    degradedNotice: false,
    busy: false,
  };
}

const CHOICE_LABELS: Record<Choice, string> = {
  accept_genai: "Open the exercise recommended by GenAI",
  use_adaptive: "Use the adaptive recommendation instead",
  decline_adaptive: "Neither, pick another adaptive exercise",
  repeat_genai: "Repeat this exercise",
  accept_adaptive: "Click to open the next exercise suggested by adaptive mode",
};

const CHOICE_STYLE: Record<Choice, string> = {
  accept_genai: "btn-genai",
  repeat_genai: "btn-genai",
  use_adaptive: "btn-adaptive",
  decline_adaptive: "btn-plain",
  accept_adaptive: "btn-adaptive",
};

export const AGREEMENT_LABELS: Record<number, string> = {
  1: "Strongly Disagree",
  2: "Disagree",
  3: "Neutral",
  4: "Agree",
  5: "Strongly Agree",
};

export function renderApp(state: AppState): UiNode {
  const body: Array<UiNode | string> = [];
  if (state.error) {
    body.push(el("div", { class: "error", role: "alert" }, [state.error]));
  }
  switch (state.screen) {
    case "login":
      body.push(loginScreen());
      break;
    case "concepts":
      body.push(conceptListScreen(state));
      break;
    case "pretest":
      body.push(pretestScreen(state));
      break;
    case "exercise":
      body.push(exerciseScreen(state));
      break;
    case "feedback":
      body.push(feedbackScreen(state));
      break;
    case "complete":
      body.push(completeScreen(state));
      break;
  }
  return el("main", { class: "app" }, body);
}

export function loginScreen(): UiNode {
  return el("section", { class: "login" }, [
    el("h1", {}, ["Sign in"]),
    el("input", { id: "username", placeholder: "username" }),
    el("input", { id: "password", type: "password", placeholder: "password" }),
    el(
      "button",
      { id: "login", class: "btn-plain" },
      ["Log in"],
      { kind: "login", username: "", password: "" },
    ),
  ]);
}

export function conceptListScreen(state: AppState): UiNode {
  const items = state.concepts.map((concept) =>
    el(
      "li",
      { class: concept.mastered ? "concept mastered" : "concept" },
      [
        el(
          "button",
          { class: "btn-plain concept-link", "data-concept": concept.id },
          [concept.name + (concept.mastered ? " ✓ mastered" : "")],
          { kind: "select_concept", conceptId: concept.id },
        ),
      ],
    ),
  );
  const children: Array<UiNode | string> = [el("h1", {}, ["Choose a concept"])];
  if (state.suggestion) {
    children.push(
      el("div", { class: "banner suggestion" }, [
        `Suggested next concept: ${state.suggestion}`,
        el(
          "button",
          { class: "btn-adaptive", "data-accept-suggestion": state.suggestion },
          ["Start it"],
          { kind: "select_concept", conceptId: state.suggestion },
        ),
      ]),
    );
  }
  children.push(el("ul", { class: "concepts" }, items));
  return el("section", { class: "concept-list" }, children);
}

export function pretestScreen(state: AppState): UiNode {
  const editors = state.pretest.map((item, idx) =>
    el("div", { class: "pretest-item" }, [
      el("h3", {}, [`${item.level} question`]),
      el("p", { class: "statement" }, [item.statement]),
      el("textarea", {
        id: `pretest-${idx}`,
        class: "editor",
        spellcheck: "false",
        "data-level": item.level,
      }),
    ]),
  );
  return el("section", { class: "pretest" }, [
    el("h1", {}, ["Placement pre-test"]),
    el("p", {}, ["Answer all three questions, one per difficulty level, then submit once."]),
    ...editors,
    el("button", { id: "pretest-submit", class: "btn-adaptive" }, ["Submit pre-test"], {
      kind: "submit_pretest",
    }),
  ]);
}

export function progressBar(progress: ProgressView | null): UiNode {
  const fraction = progress ? Math.round(progress.progress_fraction * 100) : 0;
  return el("div", { class: "progress" }, [
    el("span", { class: "progress-label" }, [
      progress ? `Learners' Skills: ${progress.level}` : "Learners' Skills",
    ]),
    el("div", { class: "progress-track" }, [
      el("div", {
        class: "progress-fill",
        style: `width: ${fraction}%`,
        "data-fraction": String(fraction),
      }),
    ]),
  ]);
}

export function exerciseScreen(state: AppState): UiNode {
  const exercise = state.exercise;
  if (!exercise) {
    return el("section", { class: "exercise empty" }, ["No exercise assigned."]);
  }
  const hints = exercise.hints.map((hint) =>
    el("li", { class: "hint" }, [
      el("strong", {}, [hint.concept]),
      hint.points.length ? `: ${hint.points.join(", ")}` : "",
    ]),
  );
  const children: Array<UiNode | string> = [
    progressBar(state.progress),
    el("div", { class: "exercise-header" }, [
      el("span", { class: `level-badge level-${exercise.level.toLowerCase()}` }, [
        exercise.level.toUpperCase() + " LEVEL",
      ]),
      el(
        "button",
        { class: "btn-plain locale-toggle", "data-locale": state.locale },
        [state.locale === "en" ? "EN | th" : "en | TH"],
        { kind: "toggle_locale" },
      ),
    ]),
    el("p", { class: "statement" }, [exercise.statement]),
  ];
  if (exercise.locale_fallback) {
    children.push(
      el("p", { class: "locale-fallback" }, [
        "(Shown in English; no translation available for this question.)",
      ]),
    );
  }
  if (hints.length) {
    children.push(el("h3", {}, ["Hints for this question:"]));
    children.push(el("ul", { class: "hints" }, hints));
  }
  children.push(el("textarea", { id: "code", class: "editor", spellcheck: "false" }));
  children.push(
    el("div", { class: "actions" }, [
      el("button", { id: "run", class: "btn-plain" }, ["▶ Run your code"], { kind: "run" }),
      el("button", { id: "submit", class: "btn-adaptive" }, ["Submit code"], { kind: "submit" }),
      el("button", { id: "try-other", class: "btn-plain" }, ["Try other practice"], {
        kind: "try_other",
      }),
    ]),
  );
  if (state.lastRunOutput !== null) {
    children.push(el("pre", { class: "run-output" }, [state.lastRunOutput]));
  }
  return el("section", { class: "exercise" }, children);
}

export function failedCasesPanel(cases: FailedCase[]): UiNode {
  const blocks = cases.map((c) =>
    el("div", { class: "failed-case" }, [
      el("p", {}, [`If you input ${c.inputs.join(", ")}, your answer should be:`]),
      el("pre", { class: "expected" }, [c.expected_output.join("\n")]),
      el("p", {}, ["However, your answer is:"]),
      el("pre", { class: "actual" }, [c.actual_output]),
    ]),
  );
  return el("div", { class: "failed-cases" }, [
    el("h3", {}, ["The result of test cases:"]),
    el("p", {}, ["In the following test case, your code will not be correct:"]),
    ...blocks,
  ]);
}

export function agreementWidget(): UiNode {
  const buttons = [1, 2, 3, 4, 5].map((rating) =>
    el(
      "button",
      { class: "agreement-btn", "data-rating": String(rating) },
      [`${rating} – ${AGREEMENT_LABELS[rating]}`],
      { kind: "rate", rating },
    ),
  );
  return el("div", { class: "agreement", id: "agreement" }, [
    el("p", {}, ["Do you agree that the feedback is helpful for you?"]),
    el("div", { class: "agreement-buttons" }, buttons),
    el("button", { class: "btn-plain", id: "skip-rating" }, ["Skip"], { kind: "skip_rating" }),
  ]);
}

export function decisionButtons(pending: PendingView): UiNode {
  // strictly one button per offered option; nothing is invented client-side
  const buttons = pending.offered.map((choice) =>
    el(
      "button",
      { class: `decision ${CHOICE_STYLE[choice]}`, "data-choice": choice },
      [CHOICE_LABELS[choice]],
      { kind: "decide", choice },
    ),
  );
  return el("div", { class: "decisions", id: "decisions" }, buttons);
}

export function repeatModal(pending: PendingView): UiNode {
  return el("div", { class: "modal repeat-modal", role: "dialog", id: "repeat-modal" }, [
    el("p", {}, [
      "You have already completed this recommended exercise. Do you wish to repeat it?",
    ]),
    decisionButtons(pending),
  ]);
}

export function feedbackScreen(state: AppState): UiNode {
  const children: Array<UiNode | string> = [progressBar(state.progress)];

  if (state.degradedNotice) {
    children.push(
      el("div", { class: "banner degraded" }, [
        "The GenAI assistant is temporarily unavailable; an adaptive recommendation is offered below.",
      ]),
    );
  }

  if (state.mode === "adaptive") {
    if (state.allPassed) {
      children.push(
        el("div", { class: "pass-message" }, [
          'You have completed all testcases, please click "Click to open the next exercise suggested by adaptive mode" button for doing the next exercise.',
        ]),
      );
    } else {
      children.push(failedCasesPanel(state.failedCases));
    }
  } else {
    if (state.feedback) {
      children.push(
        el("div", { class: "feedback-box", id: "feedback-text" }, [state.feedback.text]),
      );
      if (state.feedback.recommended_exercise_id) {
        children.push(
          el("div", { class: "recommendation-box", id: "recommendation" }, [
            el("h3", {}, ["Recommended next exercise"]),
            el("p", {}, [`Question ID: ${state.feedback.recommended_exercise_id}`]),
            state.feedback.reason
              ? el("p", { class: "reason" }, [`Reason: ${state.feedback.reason}`])
              : "",
          ]),
        );
      }
    }
    if (state.phase === "AwaitingAgreement") {
      children.push(agreementWidget());
    }
  }

  if (state.phase === "AwaitingRepeatDecision" && state.pending) {
    children.push(repeatModal(state.pending));
  } else if (state.phase === "AwaitingRecommendationDecision" && state.pending) {
    children.push(decisionButtons(state.pending));
  }
  if (state.phase === "InExercise" && !state.allPassed && state.mode === "adaptive") {
    // failing in adaptive mode keeps the learner on the same exercise
    children.push(
      el("button", { class: "btn-plain", id: "back-to-editor" }, ["Back to your code"], {
        kind: "continue_next",
      }),
    );
  }
  return el("section", { class: "feedback" }, children);
}

export function completeScreen(state: AppState): UiNode {
  const children: Array<UiNode | string> = [
    el("h1", {}, ["Concept complete!"]),
    el("p", {}, ["You reached the mastery threshold at the Difficult level."]),
  ];
  if (state.suggestion) {
    children.push(
      el("div", { class: "banner suggestion" }, [
        `Suggested next concept: ${state.suggestion}`,
        el("button", { class: "btn-adaptive" }, ["Accept suggestion"], {
          kind: "select_concept",
          conceptId: state.suggestion,
        }),
        el("button", { class: "btn-plain" }, ["Choose manually"], { kind: "continue_next" }),
      ]),
    );
  } else {
    children.push(el("p", {}, ["No further concepts in this track. Well done!"]));
    children.push(
      el("button", { class: "btn-plain" }, ["Back to concept list"], { kind: "continue_next" }),
    );
  }
  return el("section", { class: "complete" }, children);
}

// ---- tree utilities (used by tests and the DOM binder) ----

export function findAll(node: UiNode, predicate: (n: UiNode) => boolean): UiNode[] {
  const out: UiNode[] = [];
  const walk = (current: UiNode): void => {
    if (predicate(current)) {
      out.push(current);
    }
    for (const child of current.children ?? []) {
      if (typeof child !== "string") {
        walk(child);
      }
    }
  };
  walk(node);
  return out;
}

export function textOf(node: UiNode): string {
  let out = "";
  for (const child of node.children ?? []) {
    out += typeof child === "string" ? child : textOf(child);
  }
  return out;
}
