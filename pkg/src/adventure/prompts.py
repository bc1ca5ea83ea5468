"""Prompt assembly for the feedback pipeline.

Two fixed templates live as versioned resources: the composite prompt (code
verification + misconception explanation + next-exercise recommendation in one
call) and the query-reformulation prompt for the history-aware retriever.
Substitution is single-pass and literal, so placeholder-looking text inside a
bundle field survives untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

COMPOSITE_FIELDS = (
    "question_content",
    "correct_code",
    "submitted_code",
    "chat_history",
    "context",
)

EMPTY_HISTORY_NOTE = "(no prior context)"

_PLACEHOLDER_RE = re.compile(r"\{(" + "|".join(COMPOSITE_FIELDS + ("raw_query",)) + r")\}")


def _load_template(name: str) -> str:
    return resources.files("adventure.resources").joinpath(name).read_text(encoding="utf-8")


COMPOSITE_TEMPLATE = _load_template("composite_prompt.txt")
REFORMULATION_TEMPLATE = _load_template("reformulation_prompt.txt")


@dataclass(frozen=True)
class PromptBundle:
    """The five values substituted into the composite template."""

    question_content: str
    correct_code: str
    submitted_code: str
    chat_history: str
    context: str


def _substitute(template: str, values: dict[str, str]) -> str:
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template)


def build_composite_prompt(bundle: PromptBundle) -> str:
    """Render the composite template with the bundle's values, verbatim."""
    return _substitute(
        COMPOSITE_TEMPLATE,
        {
            "question_content": bundle.question_content,
            "correct_code": bundle.correct_code,
            "submitted_code": bundle.submitted_code,
            "chat_history": bundle.chat_history,
            "context": bundle.context,
        },
    )


def build_reformulation_prompt(chat_history: str, raw_query: str) -> str:
    history = chat_history if chat_history.strip() else EMPTY_HISTORY_NOTE
    return _substitute(
        REFORMULATION_TEMPLATE, {"chat_history": history, "raw_query": raw_query}
    )


def is_reformulation_prompt(prompt: str) -> bool:
    """Lets scripted test doubles tell the two call kinds apart."""
    return prompt.startswith("Given the conversation so far:")
