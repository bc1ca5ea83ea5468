"""LLM client contract and the built-in test doubles.

The contract is a single operation: complete(prompt, max_tokens, temperature)
-> text. Three kinds exist:

- http: a chat-completions-style endpoint, bearer token from the
  ADVENTURE_LLM_TOKEN environment variable.
- mock_scripted: replays canned outputs (or delegates to a handler), used by
  unit tests and adversarial fuzzing.
- mock_reference: a deterministic stand-in model that actually grades the
  submission with the unit-test runner and recommends the first retrieved
  exercise, in the exact output format the parser expects. This is what makes
  end-to-end runs hermetic.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

from . import assessment
from .knowledge_graph import KnowledgeGraph
from .prompts import is_reformulation_prompt


class LlmTransportError(Exception):
    """Network/endpoint failure; retried by generate_feedback."""


class GenAIUnavailable(Exception):
    """All retries exhausted; the session layer falls back to adaptive selection."""


@dataclass(frozen=True)
class RetryPolicy:
    retries: int = 2
    timeout_s: float = 60.0


@dataclass(frozen=True)
class LlmResponse:
    text: str
    latency_ms: int
    truncated: bool = False


class LlmClient(Protocol):
    def complete(
        self, prompt: str, max_tokens: int = 1024, temperature: float = 0.0
    ) -> str: ...


class ScriptedLlm:
    """Replays a fixed script or delegates to a handler; counts every call.

    Script entries may be exception instances, which are raised in place of a
    response (to exercise the retry path).
    """

    def __init__(
        self,
        outputs: Optional[list] = None,
        handler: Optional[Callable[[str], str]] = None,
    ):
        self.outputs = list(outputs or [])
        self.handler = handler
        self.calls = 0
        self.prompts: list[str] = []

    def complete(self, prompt: str, max_tokens: int = 1024, temperature: float = 0.0) -> str:
        self.calls += 1
        self.prompts.append(prompt)
        if self.handler is not None:
            return self.handler(prompt)
        if not self.outputs:
            raise LlmTransportError("script exhausted")
        item = self.outputs.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def _between(text: str, start: str, end: str) -> Optional[str]:
    i = text.find(start)
    if i < 0:
        return None
    i += len(start)
    j = text.find(end, i)
    return text[i:j] if j >= 0 else text[i:]


class ReferenceLlm:
    """Deterministic built-in model for hermetic end-to-end tests.

    It parses the fixed composite template back into its parts, grades the
    submitted code against the exercise found by its reference solution, emits
    canned feedback, and recommends the first exercise listed in the context
    block (the retriever already filtered out solved ones).
    """

    def __init__(self, kg: KnowledgeGraph, runner: assessment.RunnerConfig):
        self.kg = kg
        self.runner = runner
        self.calls = 0

    def _exercise_for(self, correct_code: str, question_content: str):
        for ex_id in sorted(self.kg.exercises):
            if self.kg.exercises[ex_id].reference_solution == correct_code:
                return self.kg.exercises[ex_id]
        for ex_id in sorted(self.kg.exercises):
            if self.kg.exercises[ex_id].statements["en"] == question_content:
                return self.kg.exercises[ex_id]
        return None

    def complete(self, prompt: str, max_tokens: int = 1024, temperature: float = 0.0) -> str:
        self.calls += 1
        if is_reformulation_prompt(prompt):
            query = _between(prompt, "Query: ", "\x00") or ""
            return query.strip()

        question = _between(prompt, "- question_content: ", "\n- Correct Code: ") or ""
        correct = _between(prompt, "- Correct Code: ", "\n- Submitted Code: ") or ""
        submitted = _between(prompt, "- Submitted Code: ", "\n\nIf the submitted code is incorrect:")
        context = _between(prompt, "\nContext: ", "\x00") or ""

        exercise = self._exercise_for(correct, question)
        if exercise is not None and submitted is not None:
            results = assessment.run_tests(exercise, submitted, self.runner)
            passed = all(r.passed for r in results) and bool(results)
            failed = sum(1 for r in results if not r.passed)
        else:
            passed, failed = False, -1

        if passed:
            feedback = (
                "Your submitted code is correct: it passes every test case. "
                "The solution matches the expected approach for this question."
            )
        elif failed >= 0:
            feedback = (
                f"Your submitted code is incorrect: {failed} test case(s) fail. "
                "Compare your output with the expected output and revisit the "
                "highlighted part of your code against the correct solution."
            )
        else:
            feedback = "Your submission could not be verified against this question."

        rec_ids = []
        for line in context.split("\n"):
            if line.startswith("Question ID: "):
                rec_ids.append(line[len("Question ID: ") :].strip())

        if not rec_ids:
            return feedback

        rec_id = rec_ids[0]
        rec = self.kg.exercises.get(rec_id)
        content = rec.statements["en"] if rec is not None else ""
        reason = (
            "This exercise extends the knowledge points of your current question "
            "and matches your demonstrated performance."
        )
        return (
            f"{feedback}\n\n"
            "Recommended Exercise:\n\n"
            f"Question ID: {rec_id}\n"
            f"Content: {content}\n\n"
            f"Recommended Reason: {reason}\n"
        )


class HttpLlm:
    """POSTs {"prompt","max_tokens","temperature"} with bearer-token auth."""

    def __init__(self, url: str, token_env: str = "ADVENTURE_LLM_TOKEN", timeout_s: float = 60.0):
        self.url = url
        self.token_env = token_env
        self.timeout_s = timeout_s
        self.calls = 0

    def complete(self, prompt: str, max_tokens: int = 1024, temperature: float = 0.0) -> str:
        import httpx

        self.calls += 1
        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = httpx.post(
                self.url,
                json={"prompt": prompt, "max_tokens": max_tokens, "temperature": temperature},
                headers=headers,
                timeout=self.timeout_s,
            )
            resp.raise_for_status()
            body = resp.json()
        except Exception as exc:
            raise LlmTransportError(str(exc)) from exc
        if "text" in body:
            return body["text"]
        choices = body.get("choices")
        if choices:
            first = choices[0]
            if "text" in first:
                return first["text"]
            message = first.get("message", {})
            if "content" in message:
                return message["content"]
        raise LlmTransportError("unrecognised completion payload")


def generate_feedback(
    llm: LlmClient,
    prompt: str,
    policy: RetryPolicy = RetryPolicy(),
    max_tokens: int = 1024,
    temperature: float = 0.0,
) -> LlmResponse:
    """First successful completion, retrying transport errors up to policy.retries."""
    attempts = policy.retries + 1
    last_error: Optional[Exception] = None
    for _ in range(attempts):
        started = time.monotonic()
        try:
            text = llm.complete(prompt, max_tokens=max_tokens, temperature=temperature)
        except LlmTransportError as exc:
            last_error = exc
            continue
        latency = int((time.monotonic() - started) * 1000)
        return LlmResponse(text=text, latency_ms=latency)
    raise GenAIUnavailable(f"LLM unavailable after {attempts} attempts: {last_error}")
