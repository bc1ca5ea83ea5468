"""Parse model output into feedback + recommendation, and per-learner chat memory.

The model is asked to close with a "Recommended Exercise:" block containing
"Question ID:", "Content:" and "Recommended Reason:" lines. Models often
restate the requested format before filling it, so the last "Question ID:"
line wins. Feedback text is everything before the recommendation block and is
shown to the learner even when the recommendation cannot be parsed.

Chat memory is an append-only JSONL file per learner; the prompt only ever
sees a bounded window of the most recent turns.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .knowledge_graph import KnowledgeGraph
from .llm import LlmResponse

RECOMMENDATION_HEADING = "Recommended Exercise:"
QUESTION_ID_MARKER = "Question ID:"
REASON_MARKER = "Recommended Reason:"

SOURCE_GENAI = "GenAI"
SOURCE_ADAPTIVE_FALLBACK = "AdaptiveFallback"

_EMPHASIS = " \t*_`#"

_QUESTION_ID_LINE = re.compile(
    r"^[\s*_`#>-]*Question ID:\s*(?P<rest>.*)$"
)


class ParseNoRecommendation(Exception):
    """No usable Question ID in the response; feedback text is still shown."""

    def __init__(self, feedback_text: str, candidate: Optional[str] = None):
        self.feedback_text = feedback_text
        self.candidate = candidate
        detail = f" (candidate {candidate!r} not in graph)" if candidate else ""
        super().__init__(f"no valid exercise recommendation{detail}")


@dataclass(frozen=True)
class FeedbackPayload:
    feedback_text: str
    recommended_exercise_id: Optional[str]
    recommended_reason: Optional[str]
    repeated: bool = False
    source: str = SOURCE_GENAI


def parse_feedback(response: LlmResponse, kg: KnowledgeGraph) -> FeedbackPayload:
    """Extract feedback text and the recommended exercise id from raw model output.

    The candidate id is taken from the last "Question ID:" line (markdown
    emphasis tolerated) and must resolve, case-sensitively, to an exercise in
    the graph. The repeated flag is left for the caller, which knows the
    learner's solved set.
    """
    text = response.text
    candidate: Optional[str] = None
    for line in text.split("\n"):
        match = _QUESTION_ID_LINE.match(line)
        if match:
            value = match.group("rest").strip(_EMPHASIS)
            if value:
                candidate = value

    heading_at = text.find(RECOMMENDATION_HEADING)
    feedback_text = text[:heading_at].rstrip() if heading_at >= 0 else text.strip()

    reason: Optional[str] = None
    reason_at = text.rfind(REASON_MARKER)
    if reason_at >= 0:
        reason = text[reason_at + len(REASON_MARKER) :].strip() or None

    if candidate is None or candidate not in kg.exercises:
        raise ParseNoRecommendation(feedback_text, candidate)

    return FeedbackPayload(
        feedback_text=feedback_text,
        recommended_exercise_id=candidate,
        recommended_reason=reason,
    )


def is_repeated(candidate_id: str, solved_correct: set[str]) -> bool:
    """A repeat is a recommendation of an exercise the learner already solved correctly."""
    return candidate_id in solved_correct


@dataclass(frozen=True)
class ChatTurn:
    role: str  # "learner" | "assistant"
    text: str
    ts: int


def render_history(turns: list[ChatTurn], n: int) -> str:
    """Last n turns as "Learner:"/"Assistant:" lines, oldest first; "" when empty."""
    if n < 0:
        raise ValueError("n must be >= 0")
    window = turns[-n:] if n else []
    lines = []
    for turn in window:
        label = "Learner" if turn.role == "learner" else "Assistant"
        lines.append(f"{label}: {turn.text}")
    return "\n".join(lines)


class ChatMemoryStore:
    """Append-only per-learner chat memory, one JSONL file per learner.

    With data_dir=None the store is purely in-memory (simulations).
    """

    def __init__(self, data_dir: Optional[str | Path] = None):
        self.dir = Path(data_dir) if data_dir is not None else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._cache: dict[str, list[ChatTurn]] = {}

    def _path(self, learner_id: str) -> Path:
        safe = re.sub(r"[^A-Za-z0-9_.-]", "_", learner_id)
        return self.dir / f"memory-{safe}.jsonl"

    def append(self, learner_id: str, role: str, text: str, ts: int) -> ChatTurn:
        if role not in ("learner", "assistant"):
            raise ValueError(f"unknown role {role!r}")
        turn = ChatTurn(role=role, text=text, ts=ts)
        line = json.dumps({"role": role, "text": text, "ts": ts}, ensure_ascii=False)
        with self._lock:
            turns = self._load_locked(learner_id)
            if self.dir is not None:
                with self._path(learner_id).open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
            turns.append(turn)
        return turn

    def turns(self, learner_id: str) -> list[ChatTurn]:
        with self._lock:
            return list(self._load_locked(learner_id))

    def _load_locked(self, learner_id: str) -> list[ChatTurn]:
        if learner_id in self._cache:
            return self._cache[learner_id]
        turns: list[ChatTurn] = []
        if self.dir is not None:
            path = self._path(learner_id)
            if path.exists():
                for raw in path.read_text(encoding="utf-8").splitlines():
                    if not raw.strip():
                        continue
                    obj = json.loads(raw)
                    turns.append(ChatTurn(role=obj["role"], text=obj["text"], ts=obj["ts"]))
        self._cache[learner_id] = turns
        return turns
