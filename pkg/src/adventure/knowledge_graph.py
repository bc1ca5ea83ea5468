"""Immutable graph of programming concepts and exercises.

The graph is loaded once from a single JSON document and then only read:
concept progression, exercise lookup and the retrieval index are all built on
top of it. Concepts carry an explicit order_index per practice language that
drives progression; upper_concept links exist for hint display and retrieval
text only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .elo import SEED_DIFFICULTY, DifficultyRating, Level


class GraphError(Exception):
    """Raised when a graph file cannot be loaded into a valid KnowledgeGraph."""


class GraphParseError(GraphError):
    """Malformed document: carries the offending location."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{message} (at {location})" if location else message)


class DanglingReferenceError(GraphError):
    """One or more references do not resolve; lists every offender."""

    def __init__(self, offenders: list[str]):
        self.offenders = offenders
        super().__init__("dangling references: " + ", ".join(offenders))


@dataclass(frozen=True)
class Concept:
    id: str
    name: str
    language: str
    order_index: int
    upper_concept: Optional[str] = None


@dataclass(frozen=True)
class TestCase:
    inputs: tuple[str, ...]
    expected_output: tuple[str, ...]


@dataclass(frozen=True)
class Hint:
    concept: str
    points: tuple[str, ...]


@dataclass(frozen=True)
class Exercise:
    id: str
    concept_id: str
    language_id: str
    level: Level
    statements: dict[str, str]
    hints: tuple[Hint, ...]
    required_markers: tuple[frozenset[str], ...]
    test_cases: tuple[TestCase, ...]
    reference_solution: str
    rating: DifficultyRating

    def statement(self, locale: str = "en") -> str:
        return self.statements.get(locale, self.statements["en"])


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    severity: str = "error"  # "error" | "warning"


@dataclass
class KnowledgeGraph:
    concepts: dict[str, Concept]
    exercises: dict[str, Exercise]
    by_concept: dict[str, list[str]] = field(default_factory=dict)
    by_concept_level: dict[tuple[str, Level], list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._build_indices()

    def _build_indices(self) -> None:
        self.by_concept = {}
        self.by_concept_level = {}
        for ex_id in sorted(self.exercises):
            ex = self.exercises[ex_id]
            self.by_concept.setdefault(ex.concept_id, []).append(ex_id)
            self.by_concept_level.setdefault((ex.concept_id, ex.level), []).append(ex_id)

    def concepts_for(self, language_id: str) -> list[Concept]:
        found = [c for c in self.concepts.values() if c.language == language_id]
        return sorted(found, key=lambda c: c.order_index)

    def languages(self) -> list[str]:
        return sorted({c.language for c in self.concepts.values()})

    def exercises_for(
        self,
        language_id: str,
        concept_id: str,
        level: Optional[Level] = None,
        exclude: Optional[set[str]] = None,
    ) -> list[Exercise]:
        """Exercises of a concept, id-ascending, optionally filtered by level/exclusions."""
        concept = self.concepts.get(concept_id)
        if concept is None or concept.language != language_id:
            raise KeyError(f"unknown concept {concept_id!r} for language {language_id!r}")
        excluded = exclude or set()
        ids = self.by_concept.get(concept_id, [])
        out = []
        for ex_id in ids:
            if ex_id in excluded:
                continue
            ex = self.exercises[ex_id]
            if level is not None and ex.level is not level:
                continue
            out.append(ex)
        return out

    def next_concept(
        self, language_id: str, current_concept_id: str, mastered: set[str]
    ) -> Optional[str]:
        """Unmastered concept with the smallest order_index after the current one."""
        current = self.concepts.get(current_concept_id)
        if current is None or current.language != language_id:
            raise KeyError(f"unknown concept {current_concept_id!r} for language {language_id!r}")
        for concept in self.concepts_for(language_id):
            if concept.order_index <= current.order_index:
                continue
            if concept.id in mastered:
                continue
            return concept.id
        return None


_CONCEPT_FIELDS = {"id", "name", "upper_concept", "order_index", "language"}
_EXERCISE_FIELDS = {
    "id",
    "concept_id",
    "language_id",
    "level",
    "statements",
    "hints",
    "required_markers",
    "test_cases",
    "reference_solution",
    "difficulty",
}
_TEST_CASE_FIELDS = {"inputs", "expected_output"}
_HINT_FIELDS = {"concept", "points"}


def _reject_unknown(obj: dict, allowed: set[str], location: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise GraphParseError(f"unknown fields {sorted(unknown)}", location)


def _require(obj: dict, key: str, kind, location: str):
    if key not in obj:
        raise GraphParseError(f"missing field {key!r}", location)
    value = obj[key]
    if not isinstance(value, kind):
        raise GraphParseError(f"field {key!r} must be {kind.__name__}", location)
    return value


def _parse_concept(obj: dict, idx: int) -> Concept:
    loc = f"concepts[{idx}]"
    if not isinstance(obj, dict):
        raise GraphParseError("concept must be an object", loc)
    _reject_unknown(obj, _CONCEPT_FIELDS, loc)
    order_index = _require(obj, "order_index", int, loc)
    if order_index < 0:
        raise GraphParseError("order_index must be >= 0", loc)
    upper = obj.get("upper_concept")
    if upper is not None and not isinstance(upper, str):
        raise GraphParseError("upper_concept must be a string or null", loc)
    return Concept(
        id=_require(obj, "id", str, loc),
        name=_require(obj, "name", str, loc),
        language=_require(obj, "language", str, loc),
        order_index=order_index,
        upper_concept=upper,
    )


def _parse_exercise(obj: dict, idx: int) -> Exercise:
    loc = f"exercises[{idx}]"
    if not isinstance(obj, dict):
        raise GraphParseError("exercise must be an object", loc)
    _reject_unknown(obj, _EXERCISE_FIELDS, loc)
    level_raw = _require(obj, "level", str, loc)
    try:
        level = Level(level_raw)
    except ValueError:
        raise GraphParseError(f"level must be one of {[l.value for l in Level]}", loc) from None

    statements = _require(obj, "statements", dict, loc)
    if "en" not in statements:
        raise GraphParseError('statements must contain locale "en"', loc)
    for locale, text in statements.items():
        if not isinstance(text, str):
            raise GraphParseError(f"statement for locale {locale!r} must be a string", loc)

    hints = []
    for h_idx, hint in enumerate(obj.get("hints", [])):
        h_loc = f"{loc}.hints[{h_idx}]"
        if not isinstance(hint, dict):
            raise GraphParseError("hint must be an object", h_loc)
        _reject_unknown(hint, _HINT_FIELDS, h_loc)
        points = hint.get("points", [])
        if not isinstance(points, list) or not all(isinstance(p, str) for p in points):
            raise GraphParseError("hint points must be a list of strings", h_loc)
        hints.append(Hint(concept=_require(hint, "concept", str, h_loc), points=tuple(points)))

    markers = []
    for m_idx, group in enumerate(obj.get("required_markers", [])):
        m_loc = f"{loc}.required_markers[{m_idx}]"
        if not isinstance(group, list) or not group:
            raise GraphParseError("marker set must be a non-empty list", m_loc)
        if not all(isinstance(tok, str) and tok for tok in group):
            raise GraphParseError("marker tokens must be non-empty strings", m_loc)
        markers.append(frozenset(group))

    cases = []
    raw_cases = _require(obj, "test_cases", list, loc)
    if not raw_cases:
        raise GraphParseError("at least one test case required", loc)
    for c_idx, case in enumerate(raw_cases):
        c_loc = f"{loc}.test_cases[{c_idx}]"
        if not isinstance(case, dict):
            raise GraphParseError("test case must be an object", c_loc)
        _reject_unknown(case, _TEST_CASE_FIELDS, c_loc)
        inputs = case.get("inputs", [])
        expected = _require(case, "expected_output", list, c_loc)
        if not expected:
            raise GraphParseError("expected_output must be non-empty", c_loc)
        if not all(isinstance(line, str) for line in inputs + expected):
            raise GraphParseError("test case lines must be strings", c_loc)
        cases.append(TestCase(inputs=tuple(inputs), expected_output=tuple(expected)))

    difficulty = obj.get("difficulty")
    if difficulty is None:
        d = SEED_DIFFICULTY[level]
    elif isinstance(difficulty, (int, float)) and not isinstance(difficulty, bool):
        d = float(difficulty)
    else:
        raise GraphParseError("difficulty must be a number", loc)

    return Exercise(
        id=_require(obj, "id", str, loc),
        concept_id=_require(obj, "concept_id", str, loc),
        language_id=_require(obj, "language_id", str, loc),
        level=level,
        statements=dict(statements),
        hints=tuple(hints),
        required_markers=tuple(markers),
        test_cases=tuple(cases),
        reference_solution=_require(obj, "reference_solution", str, loc),
        rating=DifficultyRating(d=d, attempts=0),
    )


def parse_graph(doc: dict) -> KnowledgeGraph:
    """Build a KnowledgeGraph from a decoded document, enforcing hard invariants."""
    if not isinstance(doc, dict):
        raise GraphParseError("top-level document must be an object", "$")
    _reject_unknown(doc, {"concepts", "exercises"}, "$")

    concepts: dict[str, Concept] = {}
    for idx, raw in enumerate(doc.get("concepts", [])):
        concept = _parse_concept(raw, idx)
        if concept.id in concepts:
            raise GraphParseError(f"duplicate concept id {concept.id!r}", f"concepts[{idx}]")
        concepts[concept.id] = concept

    exercises: dict[str, Exercise] = {}
    for idx, raw in enumerate(doc.get("exercises", [])):
        ex = _parse_exercise(raw, idx)
        if ex.id in exercises:
            raise GraphParseError(f"duplicate exercise id {ex.id!r}", f"exercises[{idx}]")
        exercises[ex.id] = ex

    dangling = []
    for concept in concepts.values():
        if concept.upper_concept is not None and concept.upper_concept not in concepts:
            dangling.append(f"concept {concept.id!r} -> upper_concept {concept.upper_concept!r}")
    for ex in exercises.values():
        if ex.concept_id not in concepts:
            dangling.append(f"exercise {ex.id!r} -> concept {ex.concept_id!r}")
    if dangling:
        raise DanglingReferenceError(sorted(dangling))

    kg = KnowledgeGraph(concepts=concepts, exercises=exercises)
    hard = [v for v in validate_graph(kg) if v.severity == "error"]
    if hard:
        raise GraphParseError("; ".join(f"{v.code}: {v.message}" for v in hard))
    return kg


def load_graph(path: str | Path) -> KnowledgeGraph:
    """Load and validate the JSON graph file (UTF-8, unknown fields rejected)."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise GraphParseError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from exc
    return parse_graph(doc)


def validate_graph(kg: KnowledgeGraph) -> list[Violation]:
    """All invariant violations; empty list means the graph is fully consistent.

    Errors break loading; warnings (level coverage gaps) are reported but
    tolerated so partially-authored graphs remain usable.
    """
    violations: list[Violation] = []

    for concept in kg.concepts.values():
        seen = {concept.id}
        node = concept
        while node.upper_concept is not None:
            if node.upper_concept in seen:
                violations.append(
                    Violation(
                        code="concept.upper_cycle",
                        message=f"upper_concept cycle through {concept.id!r}",
                    )
                )
                break
            node = kg.concepts.get(node.upper_concept)
            if node is None:
                violations.append(
                    Violation(
                        code="concept.upper_dangling",
                        message=f"concept {concept.id!r} has unresolved upper_concept",
                    )
                )
                break
            seen.add(node.id)

    by_language: dict[str, dict[int, list[str]]] = {}
    for concept in kg.concepts.values():
        by_language.setdefault(concept.language, {}).setdefault(concept.order_index, []).append(
            concept.id
        )
    for language, orders in sorted(by_language.items()):
        for order_index, ids in sorted(orders.items()):
            if len(ids) > 1:
                violations.append(
                    Violation(
                        code="concept.order_clash",
                        message=(
                            f"order_index {order_index} reused in language {language!r}: "
                            + ", ".join(sorted(ids))
                        ),
                    )
                )

    for ex in kg.exercises.values():
        concept = kg.concepts.get(ex.concept_id)
        if concept is None:
            violations.append(
                Violation(
                    code="exercise.dangling_concept",
                    message=f"exercise {ex.id!r} references unknown concept {ex.concept_id!r}",
                )
            )
        elif concept.language != ex.language_id:
            violations.append(
                Violation(
                    code="exercise.language_mismatch",
                    message=(
                        f"exercise {ex.id!r} is for language {ex.language_id!r} but its "
                        f"concept {concept.id!r} belongs to {concept.language!r}"
                    ),
                )
            )

    covered: dict[tuple[str, str], set[Level]] = {}
    for ex in kg.exercises.values():
        covered.setdefault((ex.language_id, ex.concept_id), set()).add(ex.level)
    for (language, concept_id), levels in sorted(covered.items()):
        missing = [l.value for l in Level if l not in levels]
        if missing:
            violations.append(
                Violation(
                    code="coverage.missing_level",
                    message=(
                        f"({language}, {concept_id}) has no exercises at levels: "
                        + ", ".join(missing)
                    ),
                    severity="warning",
                )
            )
    return violations


def serialize_graph(kg: KnowledgeGraph) -> dict:
    """Inverse of parse_graph on semantic content (used for round-trip checks)."""
    concepts = []
    for concept in sorted(kg.concepts.values(), key=lambda c: c.id):
        concepts.append(
            {
                "id": concept.id,
                "name": concept.name,
                "upper_concept": concept.upper_concept,
                "order_index": concept.order_index,
                "language": concept.language,
            }
        )
    exercises = []
    for ex in sorted(kg.exercises.values(), key=lambda e: e.id):
        exercises.append(
            {
                "id": ex.id,
                "concept_id": ex.concept_id,
                "language_id": ex.language_id,
                "level": ex.level.value,
                "statements": dict(ex.statements),
                "hints": [{"concept": h.concept, "points": list(h.points)} for h in ex.hints],
                "required_markers": [sorted(group) for group in ex.required_markers],
                "test_cases": [
                    {"inputs": list(c.inputs), "expected_output": list(c.expected_output)}
                    for c in ex.test_cases
                ],
                "reference_solution": ex.reference_solution,
                "difficulty": ex.rating.d,
            }
        )
    return {"concepts": concepts, "exercises": exercises}
