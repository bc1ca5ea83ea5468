"""Elo-style skill and difficulty estimation for adaptive exercise selection.

Learner ability and exercise difficulty live on a shared logit scale. After a
scored attempt both move toward the observed outcome, weighted by an
uncertainty factor that decays with the number of prior attempts
(K(n) = a / (1 + b*n)). Difficulty bands (Easy / Standard / Difficult), the
pre-test placement rule, the mastery threshold and the closest-difficulty
selector all derive from the same scale.

Everything here is a pure function over value types; callers are responsible
for serializing updates per learner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional


class Level(str, Enum):
    EASY = "Easy"
    STANDARD = "Standard"
    DIFFICULT = "Difficult"


LEVEL_ORDER = (Level.EASY, Level.STANDARD, Level.DIFFICULT)

# Seed difficulty assigned to exercises that do not override it explicitly.
SEED_DIFFICULTY = {Level.EASY: -1.0, Level.STANDARD: 0.0, Level.DIFFICULT: 1.0}


@dataclass(frozen=True)
class EloParams:
    """Tunable constants of the rating mechanism.

    a: uncertainty numerator, b: uncertainty decay per attempt,
    theta_master: mastery threshold, band_lo/band_hi: level boundaries.
    """

    a: float = 0.8
    b: float = 0.05
    theta_master: float = 1.5
    band_lo: float = -0.5
    band_hi: float = 0.5

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError("a must be positive")
        if self.b < 0:
            raise ValueError("b must be non-negative")
        if not (self.band_lo < self.band_hi < self.theta_master):
            raise ValueError("band_lo < band_hi < theta_master required")


@dataclass(frozen=True)
class SkillState:
    """Learner ability on the logit scale, scoped per (learner, language, concept)."""

    theta: float = 0.0
    attempts: int = 0


@dataclass(frozen=True)
class DifficultyRating:
    """Exercise difficulty on the same scale as SkillState.theta."""

    d: float = 0.0
    attempts: int = 0


@dataclass(frozen=True)
class Placement:
    initial_theta: float
    initial_level: Level
    already_mastered: bool = False


def expected_success(theta: float, d: float) -> float:
    """Probability that ability theta solves an item of difficulty d."""
    return 1.0 / (1.0 + math.exp(-(theta - d)))


def uncertainty_k(attempts: int, params: EloParams) -> float:
    """Update weight after `attempts` prior scored attempts."""
    if attempts < 0:
        raise ValueError("attempts must be >= 0")
    return params.a / (1.0 + params.b * attempts)


def update_ratings(
    skill: SkillState,
    item: DifficultyRating,
    outcome: int,
    params: EloParams,
) -> tuple[SkillState, DifficultyRating]:
    """Apply one scored outcome (1 = all tests passed) to both ratings.

    Skill and difficulty move by their own uncertainty weights; both attempt
    counters advance. Callers must only score the first attempt per
    (learner, exercise) pair.
    """
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    p = expected_success(skill.theta, item.d)
    k_s = uncertainty_k(skill.attempts, params)
    k_i = uncertainty_k(item.attempts, params)
    new_skill = SkillState(theta=skill.theta + k_s * (outcome - p), attempts=skill.attempts + 1)
    new_item = DifficultyRating(d=item.d + k_i * (p - outcome), attempts=item.attempts + 1)
    return new_skill, new_item


def place_from_pretest(results: Iterable[bool], params: EloParams) -> Placement:
    """Map three pass/fail pre-test flags (Easy, Standard, Difficult order) to a placement.

    The first failed item's level becomes the starting level, with theta at
    that band's midpoint. Passing everything starts the learner high in the
    Difficult band.
    """
    flags = list(results)
    if len(flags) != 3:
        raise ValueError("pre-test requires exactly 3 results (Easy, Standard, Difficult)")
    for flag, level in zip(flags, LEVEL_ORDER):
        if not flag:
            theta = band_midpoint(level, params)
            return Placement(initial_theta=theta, initial_level=level)
    all_pass_theta = params.band_hi + 0.7 * (params.theta_master - params.band_hi)
    return Placement(initial_theta=all_pass_theta, initial_level=Level.DIFFICULT)


def band_bounds(level: Level, params: EloParams) -> tuple[float, float]:
    """[lo, hi) interval of a difficulty band; Difficult is closed at theta_master."""
    width = params.band_hi - params.band_lo
    if level is Level.EASY:
        return params.band_lo - width, params.band_lo
    if level is Level.STANDARD:
        return params.band_lo, params.band_hi
    return params.band_hi, params.theta_master


def band_midpoint(level: Level, params: EloParams) -> float:
    lo, hi = band_bounds(level, params)
    return (lo + hi) / 2.0


def level_of(theta: float, params: EloParams) -> Level:
    if theta < params.band_lo:
        return Level.EASY
    if theta < params.band_hi:
        return Level.STANDARD
    return Level.DIFFICULT


def progress_fraction(theta: float, params: EloParams) -> float:
    """Position within the current band, clamped to [0, 1]; feeds the skill bar."""
    lo, hi = band_bounds(level_of(theta, params), params)
    frac = (theta - lo) / (hi - lo)
    return min(1.0, max(0.0, frac))


def mastery_reached(theta: float, params: EloParams) -> bool:
    return theta >= params.theta_master


def select_next_exercise(
    kg,
    language_id: str,
    concept_id: str,
    skill: SkillState,
    solved: set[str],
    exclude: Optional[set[str]] = None,
    ratings: Optional[dict[str, DifficultyRating]] = None,
) -> str:
    """Pick the unsolved exercise whose difficulty is closest to the learner's skill.

    Ties break on fewer item attempts, then ascending exercise id, which makes
    the choice independent of candidate order. When every exercise is already
    solved the solved filter is dropped (re-practice), but explicit exclusions
    (e.g. the current exercise) are kept as long as alternatives remain.
    `ratings` overrides the seed difficulties with live ones where provided.
    """
    excluded = exclude or set()
    exercises = kg.exercises_for(language_id, concept_id)
    if not exercises:
        raise ValueError(f"concept {concept_id!r} has no exercises for language {language_id!r}")
    candidates = [ex for ex in exercises if ex.id not in excluded]
    if not candidates:
        candidates = list(exercises)
    unsolved = [ex for ex in candidates if ex.id not in solved]
    pool = unsolved if unsolved else candidates

    def rating_of(ex) -> DifficultyRating:
        if ratings is not None and ex.id in ratings:
            return ratings[ex.id]
        return ex.rating

    best = min(
        pool,
        key=lambda ex: (abs(rating_of(ex).d - skill.theta), rating_of(ex).attempts, ex.id),
    )
    return best.id
