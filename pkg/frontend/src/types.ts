// API payload shapes, mirrored from the backend's JSON responses.
// The client renders these verbatim: correctness, ratings and recommendations
// are always computed server-side.

export type Mode = "adaptive" | "genai" | "hybrid";

export type Phase =
  | "NeedsPretest"
  | "InExercise"
  | "AwaitingAgreement"
  | "AwaitingRecommendationDecision"
  | "AwaitingRepeatDecision"
  | "ConceptComplete";

export type Choice =
  | "accept_genai"
  | "use_adaptive"
  | "decline_adaptive"
  | "repeat_genai"
  | "accept_adaptive";

export interface LoginResponse {
  token: string;
  mode: Mode;
  learner_id: string;
  locale: string;
}

export interface ConceptInfo {
  id: string;
  name: string;
  order_index: number;
  upper_concept: string | null;
  mastered: boolean;
}

export interface Hint {
  concept: string;
  points: string[];
}

export interface ExerciseView {
  id: string;
  language: string;
  level: string;
  statement: string;
  locale_used: string;
  locale_fallback: boolean;
  hints: Hint[];
}

export interface PendingView {
  genai_candidate: string | null;
  reason: string | null;
  adaptive_candidate: string | null;
  repeated: boolean;
  offered: Choice[];
  source: string;
}

export interface FeedbackView {
  text: string;
  recommended_exercise_id: string | null;
  reason: string | null;
  repeated: boolean;
  source: string;
}

export interface SessionView {
  phase: Phase;
  language: string;
  concept: string;
  pretest_items: string[];
  pretest?: ExerciseView[];
  exercise: ExerciseView | null;
  pending: PendingView | null;
  feedback: FeedbackView | null;
  next_concept_suggestion?: string | null;
}

export interface FailedCase {
  case_index: number;
  inputs: string[];
  expected_output: string[];
  actual_output: string;
}

export interface SubmissionResponse {
  phase: Phase;
  classification: string;
  all_passed: boolean;
  failed_cases: FailedCase[];
  pending: PendingView | null;
  mastered: boolean;
  next_concept_suggestion: string | null;
  degraded: boolean;
  feedback?: FeedbackView;
}

export interface ProgressView {
  theta: number;
  level: string;
  progress_fraction: number;
  solved_count: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  phase?: string;
}
