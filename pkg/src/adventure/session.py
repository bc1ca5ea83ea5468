"""Per-learner session state machine for the three instructional modes.

One session exists per (learner, language, concept). The adaptive mode loops
submit -> unit-test results -> closest-difficulty next exercise; the GenAI
mode adds retrieval-grounded model feedback and lets the model pick the next
exercise, falling back to the adaptive selector on repeats and failures; the
hybrid mode always offers both recommendation paths.

Every transition appends telemetry events, and the engine can be rebuilt from
the event stream alone (see recover_from), which is what both crash recovery
and the replay-consistency tests rely on.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

from . import assessment, elo, feedback as fb, llm as llm_mod, prompts, retrieval
from .events import EventLog, EventRecord
from .knowledge_graph import Exercise, KnowledgeGraph


class Mode(str, Enum):
    ADAPTIVE = "adaptive"
    GENAI = "genai"
    HYBRID = "hybrid"


class Phase(str, Enum):
    NEEDS_PRETEST = "NeedsPretest"
    IN_EXERCISE = "InExercise"
    AWAITING_AGREEMENT = "AwaitingAgreement"
    AWAITING_RECOMMENDATION_DECISION = "AwaitingRecommendationDecision"
    AWAITING_REPEAT_DECISION = "AwaitingRepeatDecision"
    CONCEPT_COMPLETE = "ConceptComplete"


CHOICE_ACCEPT_GENAI = "accept_genai"
CHOICE_USE_ADAPTIVE = "use_adaptive"
CHOICE_DECLINE_ADAPTIVE = "decline_adaptive"
CHOICE_REPEAT_GENAI = "repeat_genai"
CHOICE_ACCEPT_ADAPTIVE = "accept_adaptive"

SOURCE_GENAI = "genai"
SOURCE_ADAPTIVE = "adaptive"
SOURCE_ADAPTIVE_FALLBACK = "adaptive_fallback"

GENAI_UNAVAILABLE_NOTICE = (
    "Sorry, the feedback assistant is temporarily unavailable. "
    "The next exercise below was selected by the adaptive mechanism instead."
)


class SessionError(Exception):
    pass


class WrongPhase(SessionError):
    def __init__(self, expected, actual: Phase):
        self.expected = expected
        self.actual = actual
        super().__init__(f"operation requires phase {expected}, session is in {actual.value}")


class InvalidChoice(SessionError):
    def __init__(self, choice: str, offered: tuple[str, ...]):
        self.choice = choice
        self.offered = offered
        super().__init__(f"choice {choice!r} not among offered options {list(offered)}")


class ModeError(SessionError):
    pass


@dataclass
class PendingRecommendation:
    genai_candidate: Optional[str] = None
    genai_reason: Optional[str] = None
    adaptive_candidate: Optional[str] = None
    repeated: bool = False
    offered: tuple[str, ...] = ()
    source: str = SOURCE_ADAPTIVE

    def as_payload(self) -> dict:
        return {
            "genai_candidate": self.genai_candidate,
            "reason": self.genai_reason,
            "adaptive_candidate": self.adaptive_candidate,
            "repeated": self.repeated,
            "offered": list(self.offered),
            "source": self.source,
        }


@dataclass
class SessionState:
    learner_id: str
    language_id: str
    concept_id: str
    phase: Phase
    skill: elo.SkillState = field(default_factory=elo.SkillState)
    current_exercise: Optional[str] = None  # set exactly while phase is InExercise
    pending: Optional[PendingRecommendation] = None  # set exactly in decision phases
    staged: Optional[PendingRecommendation] = None  # held while the agreement is pending
    last_exercise: Optional[str] = None  # submission context after leaving InExercise
    solved_correct: set[str] = field(default_factory=set)
    rated: set[str] = field(default_factory=set)
    skipped: set[str] = field(default_factory=set)
    attempt_counts: dict[str, int] = field(default_factory=dict)
    pretest_items: tuple[str, ...] = ()
    placement: Optional[elo.Placement] = None
    mastery_notified: bool = False
    last_feedback: Optional[fb.FeedbackPayload] = None

    @property
    def session_id(self) -> str:
        return f"{self.learner_id}/{self.language_id}/{self.concept_id}"


@dataclass(frozen=True)
class SubmissionOutcome:
    phase: Phase
    classification: str
    all_passed: bool
    failed_cases: list = field(default_factory=list)
    feedback: Optional[fb.FeedbackPayload] = None
    pending: Optional[dict] = None
    mastered: bool = False
    next_concept_suggestion: Optional[str] = None
    degraded: bool = False


@dataclass(frozen=True)
class StartResult:
    phase: Phase
    pretest_items: tuple[str, ...] = ()
    current_exercise: Optional[str] = None
    next_concept_suggestion: Optional[str] = None


class SessionEngine:
    """Owns all live session state; one lock per learner serializes their ops."""

    def __init__(
        self,
        kg: KnowledgeGraph,
        params: elo.EloParams,
        runner: assessment.RunnerConfig,
        llm: Optional[llm_mod.LlmClient],
        memory: fb.ChatMemoryStore,
        event_log: EventLog,
        embedder: Optional[retrieval.Embedder] = None,
        retrieval_k: int = 5,
        memory_window: int = 6,
        retry_policy: llm_mod.RetryPolicy = llm_mod.RetryPolicy(),
    ):
        self.kg = kg
        self.params = params
        self.runner = runner
        self.llm = llm
        self.memory = memory
        self.log = event_log
        self.embedder = embedder or retrieval.HashEmbedder()
        self.index = retrieval.index_graph(kg, self.embedder)
        self.retrieval_k = retrieval_k
        self.memory_window = memory_window
        self.retry_policy = retry_policy

        self.modes: dict[str, Mode] = {}
        self.sessions: dict[tuple[str, str, str], SessionState] = {}
        self.active: dict[str, tuple[str, str]] = {}
        self.item_ratings: dict[str, elo.DifficultyRating] = {
            ex_id: ex.rating for ex_id, ex in kg.exercises.items()
        }
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- plumbing ---------------------------------------------------------

    def _lock_for(self, learner_id: str) -> threading.Lock:
        with self._locks_guard:
            if learner_id not in self._locks:
                self._locks[learner_id] = threading.Lock()
            return self._locks[learner_id]

    def set_kg(self, kg: KnowledgeGraph) -> None:
        """Atomic graph swap (admin reload); live ratings carry over where ids match."""
        self.kg = kg
        self.index = retrieval.index_graph(kg, self.embedder)
        merged = {ex_id: ex.rating for ex_id, ex in kg.exercises.items()}
        for ex_id, rating in self.item_ratings.items():
            if ex_id in merged:
                merged[ex_id] = rating
        self.item_ratings = merged

    def ensure_learner(self, learner_id: str, mode: Mode) -> None:
        existing = self.modes.get(learner_id)
        if existing is not None and existing is not mode:
            raise ModeError(f"learner {learner_id!r} is fixed to mode {existing.value}")
        self.modes[learner_id] = mode

    def record_login(self, learner_id: str) -> None:
        mode = self._mode(learner_id)
        self.log.append(learner_id, "", "login", {"mode": mode.value})

    def _mode(self, learner_id: str) -> Mode:
        mode = self.modes.get(learner_id)
        if mode is None:
            raise SessionError(f"unknown learner {learner_id!r}")
        return mode

    def _active_session(self, learner_id: str) -> SessionState:
        key = self.active.get(learner_id)
        if key is None:
            raise SessionError(f"learner {learner_id!r} has no active concept")
        return self.sessions[(learner_id, *key)]

    def _emit(self, session: SessionState, type: str, payload: dict) -> EventRecord:
        return self.log.append(session.learner_id, session.session_id, type, payload)

    def _rating(self, exercise_id: str) -> elo.DifficultyRating:
        return self.item_ratings[exercise_id]

    def _mastered_concepts(self, learner_id: str, language_id: str) -> set[str]:
        out = set()
        for (lid, lang, concept), session in self.sessions.items():
            if lid != learner_id or lang != language_id:
                continue
            if elo.mastery_reached(session.skill.theta, self.params):
                out.add(concept)
        return out

    def solved_for(self, learner_id: str) -> set[str]:
        """Everything the learner ever solved correctly, across all concepts.

        Repeats are judged against this lifetime set, not the current
        concept's, so recommendations from a neighbouring concept cannot
        silently re-assign an exercise solved earlier.
        """
        out: set[str] = set()
        for (lid, _lang, _concept), session in self.sessions.items():
            if lid == learner_id:
                out |= session.solved_correct
        return out

    def _select_adaptive(self, session: SessionState, exclude: set[str]) -> str:
        return elo.select_next_exercise(
            self.kg,
            session.language_id,
            session.concept_id,
            session.skill,
            solved=self.solved_for(session.learner_id),
            exclude=exclude,
            ratings=self.item_ratings,
        )

    # -- operations -------------------------------------------------------

    def start_concept(self, learner_id: str, language_id: str, concept_id: str) -> StartResult:
        with self._lock_for(learner_id):
            self._mode(learner_id)
            concept = self.kg.concepts.get(concept_id)
            if concept is None or concept.language != language_id:
                raise KeyError(f"unknown concept {concept_id!r} for language {language_id!r}")
            key = (learner_id, language_id, concept_id)
            fresh = key not in self.sessions
            if fresh:
                items = []
                for level in elo.LEVEL_ORDER:
                    pool = self.kg.exercises_for(language_id, concept_id, level=level)
                    if not pool:
                        raise SessionError(
                            f"concept {concept_id!r} has no {level.value} exercise for the pre-test"
                        )
                    items.append(pool[0].id)
                session = SessionState(
                    learner_id=learner_id,
                    language_id=language_id,
                    concept_id=concept_id,
                    phase=Phase.NEEDS_PRETEST,
                    pretest_items=tuple(items),
                )
                self.sessions[key] = session
            else:
                session = self.sessions[key]
            self.active[learner_id] = (language_id, concept_id)
            self._emit(
                session,
                "concept_start",
                {
                    "language": language_id,
                    "concept": concept_id,
                    "fresh": fresh,
                    "pretest_items": list(session.pretest_items) if fresh else [],
                },
            )
            suggestion = None
            if session.phase is Phase.CONCEPT_COMPLETE:
                suggestion = self.kg.next_concept(
                    language_id, concept_id, self._mastered_concepts(learner_id, language_id)
                )
            return StartResult(
                phase=session.phase,
                pretest_items=session.pretest_items if session.phase is Phase.NEEDS_PRETEST else (),
                current_exercise=session.current_exercise,
                next_concept_suggestion=suggestion,
            )

    def submit_pretest(self, learner_id: str, codes: list[str]) -> tuple[elo.Placement, str]:
        with self._lock_for(learner_id):
            session = self._active_session(learner_id)
            if session.phase is not Phase.NEEDS_PRETEST:
                raise WrongPhase(Phase.NEEDS_PRETEST.value, session.phase)
            if len(codes) != len(session.pretest_items):
                raise ValueError(f"expected {len(session.pretest_items)} pre-test submissions")
            flags = []
            for item_id, code in zip(session.pretest_items, codes):
                exercise = self.kg.exercises[item_id]
                results = assessment.run_tests(exercise, code, self.runner)
                flags.append(bool(results) and all(r.passed for r in results))
            placement = elo.place_from_pretest(flags, self.params)
            session.skill = elo.SkillState(theta=placement.initial_theta, attempts=0)
            session.placement = placement
            for item_id, passed in zip(session.pretest_items, flags):
                if passed:
                    session.solved_correct.add(item_id)
            self._emit(
                session,
                "pretest_submit",
                {
                    "items": list(session.pretest_items),
                    "results": flags,
                    "theta": placement.initial_theta,
                    "level": placement.initial_level.value,
                },
            )
            first = self._select_adaptive(session, exclude=set())
            self._assign(session, first, SOURCE_ADAPTIVE)
            return placement, first

    def _assign(self, session: SessionState, exercise_id: str, source: str) -> None:
        session.current_exercise = exercise_id
        session.pending = None
        session.staged = None
        session.last_exercise = None
        session.phase = Phase.IN_EXERCISE
        self._emit(session, "exercise_assigned", {"exercise": exercise_id, "source": source})

    def run_code(self, learner_id: str, code: str) -> str:
        """Fig 4's "Run your code": test case 0 inputs, output shown unjudged."""
        with self._lock_for(learner_id):
            session = self._active_session(learner_id)
            if session.phase is not Phase.IN_EXERCISE:
                raise WrongPhase(Phase.IN_EXERCISE.value, session.phase)
            exercise = self.kg.exercises[session.current_exercise]
            output = assessment.run_once(exercise, code, self.runner)
            self._emit(session, "run", {"exercise": exercise.id})
            return output

    def handle_submission(self, learner_id: str, code: str) -> SubmissionOutcome:
        with self._lock_for(learner_id):
            session = self._active_session(learner_id)
            if session.phase is not Phase.IN_EXERCISE:
                raise WrongPhase(Phase.IN_EXERCISE.value, session.phase)
            mode = self._mode(learner_id)
            exercise = self.kg.exercises[session.current_exercise]

            attempt_index = session.attempt_counts.get(exercise.id, 0) + 1
            session.attempt_counts[exercise.id] = attempt_index
            results = assessment.run_tests(exercise, code, self.runner)
            outcome = assessment.classify_submission(exercise, code, results)

            rated = exercise.id not in session.rated
            session.last_exercise = exercise.id
            self._emit(
                session,
                "submission",
                {
                    "exercise": exercise.id,
                    "classification": outcome.classification,
                    "all_passed": outcome.all_passed,
                    "attempt_index": attempt_index,
                    "rated": rated,
                },
            )
            if rated:
                session.rated.add(exercise.id)
                session.skill, new_rating = elo.update_ratings(
                    session.skill,
                    self._rating(exercise.id),
                    1 if outcome.all_passed else 0,
                    self.params,
                )
                self.item_ratings[exercise.id] = new_rating
            if outcome.all_passed:
                session.solved_correct.add(exercise.id)

            if mode is Mode.ADAPTIVE:
                return self._finish_adaptive(session, outcome)
            return self._finish_genai(session, mode, exercise, code, outcome)

    def _finish_adaptive(
        self, session: SessionState, outcome: assessment.AssessmentOutcome
    ) -> SubmissionOutcome:
        if not outcome.all_passed:
            return SubmissionOutcome(
                phase=session.phase,
                classification=outcome.classification,
                all_passed=False,
                failed_cases=assessment.failed_cases_view(list(outcome.results)),
            )
        suggestion = self._check_mastery(session)
        if session.phase is Phase.CONCEPT_COMPLETE:
            return SubmissionOutcome(
                phase=session.phase,
                classification=outcome.classification,
                all_passed=True,
                mastered=True,
                next_concept_suggestion=suggestion,
            )
        candidate = self._select_adaptive(session, exclude={session.current_exercise})
        pending = PendingRecommendation(
            adaptive_candidate=candidate,
            repeated=candidate in self.solved_for(session.learner_id),
            offered=(CHOICE_ACCEPT_ADAPTIVE,),
            source=SOURCE_ADAPTIVE,
        )
        self._show_recommendation(session, pending, phase=Phase.AWAITING_RECOMMENDATION_DECISION)
        return SubmissionOutcome(
            phase=session.phase,
            classification=outcome.classification,
            all_passed=True,
            pending=pending.as_payload(),
        )

    def _show_recommendation(
        self, session: SessionState, pending: PendingRecommendation, phase: Phase
    ) -> None:
        session.current_exercise = None
        session.pending = pending
        session.staged = None
        session.phase = phase
        shown = pending.genai_candidate if pending.source == SOURCE_GENAI else pending.adaptive_candidate
        self._emit(
            session,
            "recommendation_shown",
            {
                "exercise": shown,
                "source": pending.source,
                "repeated": pending.repeated,
                "offered": list(pending.offered),
                "genai_candidate": pending.genai_candidate,
                "adaptive_candidate": pending.adaptive_candidate,
                "reason": pending.genai_reason,
            },
        )

    def _finish_genai(
        self,
        session: SessionState,
        mode: Mode,
        exercise: Exercise,
        code: str,
        outcome: assessment.AssessmentOutcome,
    ) -> SubmissionOutcome:
        suggestion = self._check_mastery(session)
        if session.phase is Phase.CONCEPT_COMPLETE:
            return SubmissionOutcome(
                phase=session.phase,
                classification=outcome.classification,
                all_passed=outcome.all_passed,
                mastered=True,
                next_concept_suggestion=suggestion,
            )

        turns = self.memory.turns(session.learner_id)
        history = fb.render_history(turns, self.memory_window)
        self.memory.append(
            session.learner_id,
            "learner",
            f"Submission for question {exercise.id}: {outcome.classification}",
            self.log.clock.now_ms(),
        )

        reform = retrieval.reformulate_query(
            history, exercise.statements["en"], self.llm, prompts.build_reformulation_prompt
        )
        scope = retrieval.RetrievalScope(
            language_id=session.language_id,
            concept_id=session.concept_id,
            next_concept_id=self.kg.next_concept(
                session.language_id,
                session.concept_id,
                self._mastered_concepts(session.learner_id, session.language_id),
            ),
            solved=frozenset(self.solved_for(session.learner_id)),
        )
        context, _hits = retrieval.retrieve_context(
            self.index, self.kg, scope, reform.text, self.embedder, k=self.retrieval_k
        )
        bundle = prompts.PromptBundle(
            question_content=exercise.statements["en"],
            correct_code=exercise.reference_solution,
            submitted_code=code,
            chat_history=history,
            context=context,
        )
        prompt = prompts.build_composite_prompt(bundle)

        try:
            response = llm_mod.generate_feedback(self.llm, prompt, self.retry_policy)
        except llm_mod.GenAIUnavailable:
            return self._fallback(
                session,
                mode,
                outcome,
                feedback_text=GENAI_UNAVAILABLE_NOTICE,
                genai_feedback=False,
                degraded=True,
                reformulation_degraded=reform.degraded,
            )
        self.memory.append(session.learner_id, "assistant", response.text, self.log.clock.now_ms())

        try:
            payload = fb.parse_feedback(response, self.kg)
        except fb.ParseNoRecommendation as exc:
            return self._fallback(
                session,
                mode,
                outcome,
                feedback_text=exc.feedback_text,
                genai_feedback=True,
                degraded=False,
                reformulation_degraded=reform.degraded,
            )

        repeated = fb.is_repeated(
            payload.recommended_exercise_id, self.solved_for(session.learner_id)
        )
        payload = replace(payload, repeated=repeated)
        session.last_feedback = payload

        if mode is Mode.GENAI and repeated:
            # Repeat pop-up interrupts immediately; the agreement widget is bypassed.
            adaptive_candidate = self._select_adaptive(session, exclude={exercise.id})
            pending = PendingRecommendation(
                genai_candidate=payload.recommended_exercise_id,
                genai_reason=payload.recommended_reason,
                adaptive_candidate=adaptive_candidate,
                repeated=True,
                offered=(CHOICE_REPEAT_GENAI, CHOICE_USE_ADAPTIVE),
                source=SOURCE_GENAI,
            )
            self._emit(
                session,
                "feedback_shown",
                {
                    "source": SOURCE_GENAI,
                    "repeated": True,
                    "agreement_required": False,
                    "reformulation_degraded": reform.degraded,
                },
            )
            self._show_recommendation(session, pending, phase=Phase.AWAITING_REPEAT_DECISION)
        else:
            if mode is Mode.HYBRID:
                adaptive_candidate = self._select_adaptive(session, exclude={exercise.id})
                offered = (CHOICE_ACCEPT_GENAI, CHOICE_USE_ADAPTIVE, CHOICE_DECLINE_ADAPTIVE)
            else:
                adaptive_candidate = None
                offered = (CHOICE_ACCEPT_GENAI,)
            pending = PendingRecommendation(
                genai_candidate=payload.recommended_exercise_id,
                genai_reason=payload.recommended_reason,
                adaptive_candidate=adaptive_candidate,
                repeated=repeated,
                offered=offered,
                source=SOURCE_GENAI,
            )
            self._emit(
                session,
                "feedback_shown",
                {
                    "source": SOURCE_GENAI,
                    "repeated": repeated,
                    "agreement_required": True,
                    "reformulation_degraded": reform.degraded,
                },
            )
            # options are staged until the learner rates the feedback
            session.current_exercise = None
            session.staged = pending
            session.pending = None
            session.phase = Phase.AWAITING_AGREEMENT
            self._emit(
                session,
                "recommendation_shown",
                {
                    "exercise": pending.genai_candidate,
                    "source": SOURCE_GENAI,
                    "repeated": repeated,
                    "offered": list(offered),
                    "genai_candidate": pending.genai_candidate,
                    "adaptive_candidate": adaptive_candidate,
                    "reason": pending.genai_reason,
                },
            )

        offered_now = session.pending or session.staged
        return SubmissionOutcome(
            phase=session.phase,
            classification=outcome.classification,
            all_passed=outcome.all_passed,
            failed_cases=assessment.failed_cases_view(list(outcome.results)),
            feedback=payload,
            pending=offered_now.as_payload() if offered_now else None,
        )

    def _fallback(
        self,
        session: SessionState,
        mode: Mode,
        outcome: assessment.AssessmentOutcome,
        feedback_text: str,
        genai_feedback: bool,
        degraded: bool,
        reformulation_degraded: bool,
    ) -> SubmissionOutcome:
        """Adaptive selection stands in when GenAI recommendation is unusable."""
        candidate = self._select_adaptive(session, exclude={session.last_exercise})
        payload = fb.FeedbackPayload(
            feedback_text=feedback_text,
            recommended_exercise_id=None,
            recommended_reason=None,
            repeated=False,
            source=fb.SOURCE_ADAPTIVE_FALLBACK,
        )
        session.last_feedback = payload
        offered = (
            (CHOICE_USE_ADAPTIVE, CHOICE_DECLINE_ADAPTIVE)
            if mode is Mode.HYBRID
            else (CHOICE_USE_ADAPTIVE,)
        )
        pending = PendingRecommendation(
            adaptive_candidate=candidate,
            repeated=False,
            offered=offered,
            source=SOURCE_ADAPTIVE_FALLBACK,
        )
        self._emit(
            session,
            "feedback_shown",
            {
                "source": SOURCE_GENAI if genai_feedback else SOURCE_ADAPTIVE_FALLBACK,
                "repeated": False,
                "agreement_required": genai_feedback,
                "degraded": degraded,
                "reformulation_degraded": reformulation_degraded,
            },
        )
        if genai_feedback:
            session.current_exercise = None
            session.staged = pending
            session.pending = None
            session.phase = Phase.AWAITING_AGREEMENT
            self._emit(
                session,
                "recommendation_shown",
                {
                    "exercise": candidate,
                    "source": SOURCE_ADAPTIVE_FALLBACK,
                    "repeated": False,
                    "offered": list(offered),
                    "genai_candidate": None,
                    "adaptive_candidate": candidate,
                    "reason": None,
                },
            )
        else:
            self._show_recommendation(
                session, pending, phase=Phase.AWAITING_RECOMMENDATION_DECISION
            )
        offered_now = session.pending or session.staged
        return SubmissionOutcome(
            phase=session.phase,
            classification=outcome.classification,
            all_passed=outcome.all_passed,
            failed_cases=assessment.failed_cases_view(list(outcome.results)),
            feedback=payload,
            pending=offered_now.as_payload() if offered_now else None,
            degraded=degraded,
        )

    def record_agreement(
        self, learner_id: str, rating: Optional[int], skipped: bool = False
    ) -> None:
        with self._lock_for(learner_id):
            mode = self._mode(learner_id)
            if mode is Mode.ADAPTIVE:
                raise ModeError("adaptive mode has no feedback agreement step")
            session = self._active_session(learner_id)
            if session.phase is not Phase.AWAITING_AGREEMENT:
                raise WrongPhase(Phase.AWAITING_AGREEMENT.value, session.phase)
            if skipped:
                value = 0
            else:
                if not isinstance(rating, int) or not 1 <= rating <= 5:
                    raise ValueError("rating must be an integer between 1 and 5")
                value = rating
            self._emit(session, "agreement", {"rating": value, "skipped": skipped})
            session.pending = session.staged or session.pending
            session.staged = None
            session.phase = _phase_after_agreement(mode, session.pending)

    def resolve_recommendation(self, learner_id: str, choice: str) -> str:
        with self._lock_for(learner_id):
            mode = self._mode(learner_id)
            session = self._active_session(learner_id)
            if session.phase not in (
                Phase.AWAITING_RECOMMENDATION_DECISION,
                Phase.AWAITING_REPEAT_DECISION,
            ):
                raise WrongPhase("a recommendation decision phase", session.phase)
            pending = session.pending
            if pending is None or choice not in pending.offered:
                raise InvalidChoice(choice, pending.offered if pending else ())

            self._emit(
                session,
                "recommendation_decision",
                {
                    "offered": list(pending.offered),
                    "chosen": choice,
                    "repeated": pending.repeated,
                    "source": pending.source,
                },
            )

            if choice == CHOICE_ACCEPT_GENAI:
                if mode is Mode.HYBRID and pending.repeated:
                    # Accepted a repeated recommendation: remind before assigning.
                    pending.offered = (CHOICE_REPEAT_GENAI, CHOICE_USE_ADAPTIVE)
                    session.phase = Phase.AWAITING_REPEAT_DECISION
                    return pending.genai_candidate
                self._assign(session, pending.genai_candidate, SOURCE_GENAI)
                return pending.genai_candidate
            if choice == CHOICE_REPEAT_GENAI:
                self._assign(session, pending.genai_candidate, SOURCE_GENAI)
                return pending.genai_candidate
            if choice == CHOICE_ACCEPT_ADAPTIVE or choice == CHOICE_USE_ADAPTIVE:
                self._assign(session, pending.adaptive_candidate, SOURCE_ADAPTIVE)
                return pending.adaptive_candidate
            if choice == CHOICE_DECLINE_ADAPTIVE:
                exclude = {session.last_exercise, pending.adaptive_candidate}
                exclude.discard(None)
                alternative = self._select_adaptive(session, exclude=exclude)
                self._assign(session, alternative, SOURCE_ADAPTIVE)
                return alternative
            raise InvalidChoice(choice, pending.offered)

    def request_other_exercise(self, learner_id: str) -> str:
        with self._lock_for(learner_id):
            session = self._active_session(learner_id)
            if session.phase is not Phase.IN_EXERCISE:
                raise WrongPhase(Phase.IN_EXERCISE.value, session.phase)
            old = session.current_exercise
            self._emit(session, "skip", {"exercise": old})
            session.skipped.add(old)
            # consecutive skips keep walking to fresh exercises until the pool
            # is exhausted, at which point skipped ones become eligible again
            replacement = self._select_adaptive(session, exclude={old} | session.skipped)
            self._assign(session, replacement, SOURCE_ADAPTIVE)
            return replacement

    def _check_mastery(self, session: SessionState) -> Optional[str]:
        """ConceptComplete transition once theta crosses the mastery threshold."""
        if session.mastery_notified:
            return None
        if not elo.mastery_reached(session.skill.theta, self.params):
            return None
        session.mastery_notified = True
        session.phase = Phase.CONCEPT_COMPLETE
        session.current_exercise = None
        session.pending = None
        session.staged = None
        suggestion = self.kg.next_concept(
            session.language_id,
            session.concept_id,
            self._mastered_concepts(session.learner_id, session.language_id),
        )
        self._emit(
            session,
            "concept_mastered",
            {"concept": session.concept_id, "suggestion": suggestion},
        )
        return suggestion

    def progress(self, learner_id: str) -> dict:
        session = self._active_session(learner_id)
        theta = session.skill.theta
        return {
            "theta": theta,
            "level": elo.level_of(theta, self.params).value,
            "progress_fraction": elo.progress_fraction(theta, self.params),
            "solved_count": len(session.solved_correct),
        }

    # -- event-sourced recovery -------------------------------------------

    def recover_from(self, events: Iterable[EventRecord]) -> None:
        """Rebuild engine state from an event stream (no code execution, no LLM)."""
        for event in events:
            self._apply(event)

    def _apply(self, event: EventRecord) -> None:
        learner = event.learner_id
        p = event.payload
        if event.type == "login":
            self.modes.setdefault(learner, Mode(p["mode"]))
            return
        if event.type == "concept_start":
            key = (learner, p["language"], p["concept"])
            if p["fresh"]:
                self.sessions[key] = SessionState(
                    learner_id=learner,
                    language_id=p["language"],
                    concept_id=p["concept"],
                    phase=Phase.NEEDS_PRETEST,
                    pretest_items=tuple(p["pretest_items"]),
                )
            self.active[learner] = (p["language"], p["concept"])
            return

        key = self.active.get(learner)
        if key is None:
            return
        session = self.sessions.get((learner, *key))
        if session is None:
            return

        if event.type == "pretest_submit":
            session.skill = elo.SkillState(theta=p["theta"], attempts=0)
            session.placement = elo.Placement(
                initial_theta=p["theta"], initial_level=elo.Level(p["level"])
            )
            for item_id, passed in zip(p["items"], p["results"]):
                if passed:
                    session.solved_correct.add(item_id)
        elif event.type == "exercise_assigned":
            session.current_exercise = p["exercise"]
            session.pending = None
            session.staged = None
            session.last_exercise = None
            session.phase = Phase.IN_EXERCISE
        elif event.type == "submission":
            session.attempt_counts[p["exercise"]] = p["attempt_index"]
            session.last_exercise = p["exercise"]
            if p["rated"]:
                session.rated.add(p["exercise"])
                session.skill, new_rating = elo.update_ratings(
                    session.skill,
                    self._rating(p["exercise"]),
                    1 if p["all_passed"] else 0,
                    self.params,
                )
                self.item_ratings[p["exercise"]] = new_rating
            if p["all_passed"]:
                session.solved_correct.add(p["exercise"])
        elif event.type == "feedback_shown":
            if p.get("agreement_required"):
                session.current_exercise = None
                session.phase = Phase.AWAITING_AGREEMENT
        elif event.type == "recommendation_shown":
            shown = PendingRecommendation(
                genai_candidate=p.get("genai_candidate"),
                genai_reason=p.get("reason"),
                adaptive_candidate=p.get("adaptive_candidate"),
                repeated=p["repeated"],
                offered=tuple(p["offered"]),
                source=p["source"],
            )
            if session.phase is Phase.AWAITING_AGREEMENT:
                session.staged = shown
            else:
                session.current_exercise = None
                session.pending = shown
                session.staged = None
                session.phase = (
                    Phase.AWAITING_REPEAT_DECISION
                    if CHOICE_REPEAT_GENAI in shown.offered
                    else Phase.AWAITING_RECOMMENDATION_DECISION
                )
        elif event.type == "skip":
            session.skipped.add(p["exercise"])
        elif event.type == "agreement":
            session.pending = session.staged or session.pending
            session.staged = None
            session.phase = _phase_after_agreement(self.modes[learner], session.pending)
        elif event.type == "recommendation_decision":
            if (
                p["chosen"] == CHOICE_ACCEPT_GENAI
                and p["repeated"]
                and self.modes[learner] is Mode.HYBRID
                and session.pending is not None
            ):
                session.pending.offered = (CHOICE_REPEAT_GENAI, CHOICE_USE_ADAPTIVE)
                session.phase = Phase.AWAITING_REPEAT_DECISION
        elif event.type == "concept_mastered":
            session.mastery_notified = True
            session.phase = Phase.CONCEPT_COMPLETE
            session.current_exercise = None
            session.pending = None

    def snapshot(self) -> dict:
        """Comparable projection of all session state (used by recovery tests)."""
        out = {}
        for key, session in self.sessions.items():
            out["/".join(key)] = {
                "phase": session.phase.value,
                "current_exercise": session.current_exercise,
                "solved": sorted(session.solved_correct),
                "theta": session.skill.theta,
                "attempts": session.skill.attempts,
                "pending": session.pending.as_payload() if session.pending else None,
                "staged": session.staged.as_payload() if session.staged else None,
                "last_exercise": session.last_exercise,
                "rated": sorted(session.rated),
                "skipped": sorted(session.skipped),
            }
        return out


def _phase_after_agreement(mode: Mode, pending: Optional[PendingRecommendation]) -> Phase:
    if mode is Mode.GENAI and pending is not None and pending.repeated:
        return Phase.AWAITING_REPEAT_DECISION
    return Phase.AWAITING_RECOMMENDATION_DECISION
