"""Deterministic simulated learners driving the full engine end to end.

A cohort of profile-driven learners runs against the built-in reference model
and the identity practice language, producing event logs for the analytics
pipeline and the replay/determinism tests. The RNG is SplitMix64, seeded per
run, so the same seed yields a byte-identical log on any platform.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import assessment, elo
from .events import EventLog, EventRecord, LogicalClock
from .feedback import ChatMemoryStore
from .knowledge_graph import Exercise, KnowledgeGraph
from .llm import ReferenceLlm
from .session import (
    CHOICE_ACCEPT_ADAPTIVE,
    CHOICE_ACCEPT_GENAI,
    CHOICE_REPEAT_GENAI,
    CHOICE_USE_ADAPTIVE,
    Mode,
    Phase,
    SessionEngine,
)

MASK64 = (1 << 64) - 1


class SplitMix64:
    """Small named 64-bit PRNG; identical sequences on every platform."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) / float(1 << 53)

    def randint(self, lo: int, hi: int) -> int:
        return lo + self.next_u64() % (hi - lo + 1)

    def choice(self, seq):
        return seq[self.next_u64() % len(seq)]


POLICY_ACCEPT_GENAI = "always_accept_genai"
POLICY_USE_ADAPTIVE = "always_use_adaptive"
POLICY_COIN_FLIP = "coin_flip"


@dataclass(frozen=True)
class SimLearnerProfile:
    true_theta: float = 1.0
    slip: float = 0.05
    guess: float = 0.02
    policy: str = POLICY_ACCEPT_GENAI
    coin_p: float = 0.5
    agreement_rating: int = 4  # 0 means "skip the rating"
    empty_rate: float = 0.02
    skip_rate: float = 0.03

    def __post_init__(self):
        for name in ("slip", "guess", "coin_p", "empty_rate", "skip_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a probability")

    @classmethod
    def from_dict(cls, doc: dict) -> "SimLearnerProfile":
        return cls(**doc)


_COMPARISON_FLIPS = [("==", "!="), (">=", "<"), ("<=", ">"), (">", "<="), ("<", ">=")]


def mutate_solution(
    exercise: Exercise, rng: SplitMix64, runner: assessment.RunnerConfig
) -> str:
    """A variant of the reference solution guaranteed to fail at least one case.

    Tries dropping the last line, flipping a comparison, or deleting an else
    line; each candidate is verified by actually running the tests. After five
    fruitless tries it falls back to appending a spurious output line.
    """
    reference = exercise.reference_solution
    if not reference.strip():
        raise ValueError("reference solution is empty")

    def fails(code: str) -> bool:
        results = assessment.run_tests(exercise, code, runner)
        return any(not r.passed for r in results)

    strategies = ("drop_last_line", "flip_comparison", "drop_else")
    for _ in range(5):
        strategy = rng.choice(strategies)
        candidate = _apply_mutation(reference, strategy, rng)
        if candidate is None or candidate == reference:
            continue
        if fails(candidate):
            return candidate

    if exercise.language_id == assessment.IDENTITY_LANGUAGE:
        fallback = reference.rstrip("\n") + "\nunexpected extra line\n"
    else:
        fallback = reference.rstrip("\n") + '\nprint("unexpected extra line")\n'
    if not fails(fallback):
        raise AssertionError(f"could not derive a failing mutation for {exercise.id}")
    return fallback


def _apply_mutation(reference: str, strategy: str, rng: SplitMix64) -> Optional[str]:
    lines = reference.rstrip("\n").split("\n")
    if strategy == "drop_last_line":
        if len(lines) == 1:
            return ""
        return "\n".join(lines[:-1]) + "\n"
    if strategy == "flip_comparison":
        for old, new in _COMPARISON_FLIPS:
            pattern = rf"(?<![=<>!]){re.escape(old)}(?![=<>])"
            if re.search(pattern, reference):
                return re.sub(pattern, new, reference, count=1)
        return None
    if strategy == "drop_else":
        kept = [line for line in lines if line.strip() != "else:"]
        if len(kept) == len(lines):
            return None
        return "\n".join(kept) + "\n"
    raise ValueError(f"unknown strategy {strategy!r}")


_MODE_PREFIX = {Mode.ADAPTIVE: "ad", Mode.GENAI: "ga", Mode.HYBRID: "hy"}


def simulate(
    kg: KnowledgeGraph,
    mode: Mode,
    n_learners: int,
    n_steps: int,
    seed: int,
    profile: SimLearnerProfile = SimLearnerProfile(),
    language: str = "identity",
    out_path: Optional[str | Path] = None,
    params: elo.EloParams = elo.EloParams(),
) -> tuple[list[EventRecord], SessionEngine]:
    """Run a cohort; returns the event stream and the live engine for inspection."""
    if out_path is not None:
        out_path = Path(out_path)
        if out_path.exists():
            out_path.unlink()
    rng = SplitMix64(seed)
    runner = assessment.RunnerConfig.with_defaults()
    log = EventLog(path=out_path, clock=LogicalClock())
    engine = SessionEngine(
        kg=kg,
        params=params,
        runner=runner,
        llm=ReferenceLlm(kg, runner),
        memory=ChatMemoryStore(None),
        event_log=log,
    )
    concepts = [c.id for c in kg.concepts_for(language)]
    if not concepts:
        raise ValueError(f"graph has no concepts for language {language!r}")

    for i in range(n_learners):
        learner = f"{_MODE_PREFIX[mode]}{i:03d}"
        engine.ensure_learner(learner, mode)
        engine.record_login(learner)
        _run_learner(engine, kg, learner, concepts, n_steps, profile, rng, runner)
    return log.events(), engine


def _sample_correct(profile: SimLearnerProfile, d: float, rng: SplitMix64) -> bool:
    p = elo.expected_success(profile.true_theta, d)
    p_observed = (1.0 - profile.slip) * p + profile.guess * (1.0 - p)
    return rng.random() < p_observed


def _submission_code(
    engine: SessionEngine,
    exercise: Exercise,
    profile: SimLearnerProfile,
    rng: SplitMix64,
    runner: assessment.RunnerConfig,
) -> str:
    if rng.random() < profile.empty_rate:
        return ""
    d = engine.item_ratings[exercise.id].d
    if _sample_correct(profile, d, rng):
        return exercise.reference_solution
    return mutate_solution(exercise, rng, runner)


def _decide(offered: tuple[str, ...], profile: SimLearnerProfile, rng: SplitMix64) -> str:
    genai_options = [c for c in offered if c in (CHOICE_ACCEPT_GENAI, CHOICE_REPEAT_GENAI)]
    adaptive_options = [c for c in offered if c in (CHOICE_USE_ADAPTIVE, CHOICE_ACCEPT_ADAPTIVE)]
    if profile.policy == POLICY_ACCEPT_GENAI:
        preference = genai_options + adaptive_options
    elif profile.policy == POLICY_USE_ADAPTIVE:
        preference = adaptive_options + genai_options
    elif profile.policy == POLICY_COIN_FLIP:
        if genai_options and adaptive_options:
            pick_genai = rng.random() < profile.coin_p
            preference = genai_options if pick_genai else adaptive_options
        else:
            preference = genai_options + adaptive_options
    else:
        raise ValueError(f"unknown policy {profile.policy!r}")
    if not preference:
        # nothing recognisable offered; take the first option deterministically
        return offered[0]
    return preference[0]


def _run_learner(
    engine: SessionEngine,
    kg: KnowledgeGraph,
    learner: str,
    concepts: list[str],
    n_steps: int,
    profile: SimLearnerProfile,
    rng: SplitMix64,
    runner: assessment.RunnerConfig,
) -> None:
    language = kg.concepts[concepts[0]].language
    concept_iter = iter(concepts)
    engine.start_concept(learner, language, next(concept_iter))
    steps = 0
    while steps < n_steps:
        session = engine._active_session(learner)
        phase = session.phase
        if phase is Phase.NEEDS_PRETEST:
            codes = []
            for item_id in session.pretest_items:
                item = kg.exercises[item_id]
                if _sample_correct(profile, item.rating.d, rng):
                    codes.append(item.reference_solution)
                else:
                    codes.append("")
            engine.submit_pretest(learner, codes)
        elif phase is Phase.IN_EXERCISE:
            if profile.skip_rate and rng.random() < profile.skip_rate:
                engine.request_other_exercise(learner)
                continue
            exercise = kg.exercises[session.current_exercise]
            code = _submission_code(engine, exercise, profile, rng, runner)
            engine.handle_submission(learner, code)
            steps += 1
        elif phase is Phase.AWAITING_AGREEMENT:
            if profile.agreement_rating == 0:
                engine.record_agreement(learner, None, skipped=True)
            else:
                engine.record_agreement(learner, profile.agreement_rating)
        elif phase in (Phase.AWAITING_RECOMMENDATION_DECISION, Phase.AWAITING_REPEAT_DECISION):
            choice = _decide(session.pending.offered, profile, rng)
            engine.resolve_recommendation(learner, choice)
        elif phase is Phase.CONCEPT_COMPLETE:
            next_id = next(concept_iter, None)
            if next_id is None:
                break
            engine.start_concept(learner, language, next_id)
        else:
            raise AssertionError(f"simulator stuck in phase {phase}")
