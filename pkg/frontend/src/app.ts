// Controller: owns the state, talks to the API, never grades anything itself.
// One mutating request is in flight at a time; buttons are disabled while busy.

import { ApiClient, ApiError } from "./api.js";
import type { SubmissionResponse } from "./types.js";
import { AppState, initialState, type Action } from "./views.js";

export interface InputReader {
  code(): string;
  pretestCodes(): string[];
  credentials(): { username: string; password: string };
}

export class App {
  state: AppState = initialState();

  constructor(
    private readonly api: ApiClient,
    private readonly inputs: InputReader,
    private readonly onChange: (state: AppState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  async dispatch(action: Action): Promise<void> {
    if (this.state.busy) {
      return;
    }
    this.state.busy = true;
    this.state.error = null;
    this.emit();
    try {
      await this.perform(action);
    } catch (err) {
      if (err instanceof ApiError) {
        this.state.error = `${err.code}: ${err.message}`;
        if (err.status === 409 && err.phase) {
          // phase drifted (another tab, restart): re-sync with the server
          await this.refreshSession();
        }
      } else {
        this.state.error = String(err);
      }
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  private async perform(action: Action): Promise<void> {
    switch (action.kind) {
      case "login": {
        const creds = action.username
          ? { username: action.username, password: action.password }
          : this.inputs.credentials();
        const session = await this.api.login(creds.username, creds.password);
        this.state.mode = session.mode;
        this.state.locale = session.locale || "en";
        await this.loadConcepts();
        break;
      }
      case "select_concept": {
        const started = await this.api.startConcept(action.conceptId, this.state.language);
        await this.refreshSession();
        if (started.phase === "ConceptComplete") {
          this.state.screen = "complete";
          this.state.suggestion = started.next_concept_suggestion;
        }
        break;
      }
      case "submit_pretest": {
        await this.api.submitPretest(this.inputs.pretestCodes());
        await this.refreshSession();
        break;
      }
      case "run": {
        const result = await this.api.run(this.inputs.code());
        this.state.lastRunOutput = result.output;
        break;
      }
      case "submit": {
        let response: SubmissionResponse;
        try {
          response = await this.api.submit(this.inputs.code());
        } catch (err) {
          // degraded GenAI responses arrive as 503 but still carry the payload
          if (err instanceof ApiError && err.status === 503) {
            await this.refreshSession();
            this.state.screen = "feedback";
            this.state.degradedNotice = true;
            return;
          }
          throw err;
        }
        this.applySubmission(response);
        break;
      }
      case "try_other": {
        await this.api.skipExercise();
        await this.refreshSession();
        break;
      }
      case "rate": {
        await this.api.rate(action.rating);
        await this.refreshSession();
        this.state.screen = "feedback";
        break;
      }
      case "skip_rating": {
        await this.api.skipRating();
        await this.refreshSession();
        this.state.screen = "feedback";
        break;
      }
      case "decide": {
        await this.api.decide(action.choice);
        await this.refreshSession();
        break;
      }
      case "toggle_locale": {
        this.state.locale = this.state.locale === "en" ? "th" : "en";
        await this.refreshSession();
        break;
      }
      case "continue_next": {
        if (this.state.phase === "InExercise") {
          this.state.screen = "exercise";
        } else {
          await this.loadConcepts();
        }
        break;
      }
    }
  }

  private applySubmission(response: SubmissionResponse): void {
    this.state.phase = response.phase;
    this.state.allPassed = response.all_passed;
    this.state.failedCases = response.failed_cases ?? [];
    this.state.feedback = response.feedback ?? null;
    this.state.pending = response.pending;
    this.state.degradedNotice = response.degraded;
    if (response.mastered) {
      this.state.screen = "complete";
      this.state.suggestion = response.next_concept_suggestion;
    } else if (response.phase === "InExercise" && response.all_passed === false) {
      // adaptive mode failure: show the failed cases, stay on the exercise
      this.state.screen = "feedback";
    } else {
      this.state.screen = "feedback";
    }
  }

  async loadConcepts(): Promise<void> {
    const listing = await this.api.concepts(this.state.language);
    this.state.concepts = listing.concepts;
    this.state.screen = "concepts";
  }

  async refreshSession(): Promise<void> {
    const view = await this.api.current(this.state.locale);
    this.state.phase = view.phase;
    this.state.exercise = view.exercise;
    this.state.pending = view.pending;
    this.state.feedback = view.feedback ?? this.state.feedback;
    this.state.suggestion = view.next_concept_suggestion ?? null;
    switch (view.phase) {
      case "NeedsPretest":
        this.state.pretest = view.pretest ?? [];
        this.state.screen = "pretest";
        break;
      case "InExercise":
        this.state.screen = "exercise";
        this.state.lastRunOutput = null;
        try {
          this.state.progress = await this.api.progress();
        } catch {
          this.state.progress = null;
        }
        break;
      case "AwaitingAgreement":
      case "AwaitingRecommendationDecision":
      case "AwaitingRepeatDecision":
        this.state.screen = "feedback";
        break;
      case "ConceptComplete":
        this.state.screen = "complete";
        break;
    }
  }
}
