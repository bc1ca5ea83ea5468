"""Append-only telemetry event stream.

Every state mutation in the platform emits exactly one line here; the stream
is the single source of truth for both crash recovery and the learning-log
analytics. Timestamps are strictly increasing per learner (the writer bumps
clashing ones), serialization is canonical JSON so identical runs produce
byte-identical logs.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

EVENT_TYPES = frozenset(
    {
        "login",
        "concept_start",
        "pretest_submit",
        "exercise_assigned",
        "run",
        "submission",
        "feedback_shown",
        "agreement",
        "recommendation_shown",
        "recommendation_decision",
        "skip",
        "concept_mastered",
    }
)


@dataclass(frozen=True)
class EventRecord:
    ts: int  # UTC milliseconds
    learner_id: str
    session_id: str
    type: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "ts": self.ts,
                "learner": self.learner_id,
                "session": self.session_id,
                "type": self.type,
                "payload": self.payload,
            },
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "EventRecord":
        obj = json.loads(line)
        return cls(
            ts=obj["ts"],
            learner_id=obj["learner"],
            session_id=obj["session"],
            type=obj["type"],
            payload=obj["payload"],
        )


class Clock:
    """Wall clock in UTC milliseconds; swap for a logical clock in simulations."""

    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000


class LogicalClock(Clock):
    """Deterministic counter clock so simulated logs are byte-reproducible."""

    def __init__(self, start_ms: int = 1_760_000_000_000, step_ms: int = 1):
        self._next = start_ms
        self.step = step_ms

    def now_ms(self) -> int:
        value = self._next
        self._next += self.step
        return value


class EventLog:
    """Serialized append-only writer with an optional JSONL file behind it."""

    def __init__(self, path: Optional[str | Path] = None, clock: Optional[Clock] = None):
        self.path = Path(path) if path is not None else None
        self.clock = clock or Clock()
        self._lock = threading.Lock()
        self._events: list[EventRecord] = []
        self._last_ts: dict[str, int] = {}
        if self.path is not None and self.path.exists():
            for event in read_event_file(self.path, repair=True):
                self._events.append(event)
                self._last_ts[event.learner_id] = event.ts

    def append(self, learner_id: str, session_id: str, type: str, payload: dict) -> EventRecord:
        if type not in EVENT_TYPES:
            raise ValueError(f"unknown event type {type!r}")
        with self._lock:
            ts = self.clock.now_ms()
            floor = self._last_ts.get(learner_id)
            if floor is not None and ts <= floor:
                ts = floor + 1
            event = EventRecord(
                ts=ts, learner_id=learner_id, session_id=session_id, type=type, payload=payload
            )
            self._events.append(event)
            self._last_ts[learner_id] = ts
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(event.to_json() + "\n")
        return event

    def events(self) -> list[EventRecord]:
        with self._lock:
            return list(self._events)

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)


def read_event_file(path: str | Path, repair: bool = False) -> Iterator[EventRecord]:
    """Stream events from a JSONL file.

    With repair=True a corrupt final line (torn write) is dropped and the file
    truncated to the last good record; corruption elsewhere still raises.
    """
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    good_bytes = 0
    events: list[EventRecord] = []
    for idx, line in enumerate(lines):
        try:
            event = EventRecord.from_json(line)
        except (json.JSONDecodeError, KeyError) as exc:
            if repair and idx == len(lines) - 1:
                import logging

                logging.getLogger(__name__).warning(
                    "dropping corrupt trailing event line in %s: %s", path, exc
                )
                with path.open("r+", encoding="utf-8") as fh:
                    fh.truncate(good_bytes)
                break
            raise ValueError(f"corrupt event log {path} at line {idx + 1}: {exc}") from exc
        events.append(event)
        good_bytes += len((line + "\n").encode("utf-8"))
    return iter(events)


def events_for(events: Iterable[EventRecord], learner_id: str) -> list[EventRecord]:
    return [e for e in events if e.learner_id == learner_id]
