"""Run submitted code against an exercise's test cases and classify the result.

Real practice languages execute through configured subprocess commands with a
wall-clock timeout and an output cap; a built-in "identity" language (the
program text is its own stdout) keeps tests and simulations hermetic.

Output comparison: both sides are split into lines, trailing whitespace is
trimmed per line and trailing empty lines dropped, then the sequences must be
equal. Crashes, timeouts and empty output all surface as a sentinel so the
failed-cases view mirrors what the learner saw.
"""

from __future__ import annotations

import re
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .knowledge_graph import Exercise

NO_OUTPUT_SENTINEL = "∅ (no output)"

IDENTITY_LANGUAGE = "identity"

_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+")


class RunnerError(Exception):
    """Runner/sandbox failure, as opposed to a failure of the learner's code."""


@dataclass(frozen=True)
class RunnerSpec:
    """How to execute one practice language: command template with a {file} slot."""

    cmd: tuple[str, ...]
    timeout_s: float = 5.0
    max_output_bytes: int = 64 * 1024


@dataclass
class RunnerConfig:
    runners: dict[str, RunnerSpec] = field(default_factory=dict)

    def spec_for(self, language_id: str) -> Optional[RunnerSpec]:
        return self.runners.get(language_id)

    @classmethod
    def with_defaults(cls, extra: Optional[dict[str, RunnerSpec]] = None) -> "RunnerConfig":
        """Identity built-in plus a python runner bound to the current interpreter."""
        runners = {"python": RunnerSpec(cmd=(sys.executable, "{file}"))}
        if extra:
            runners.update(extra)
        return cls(runners=runners)


@dataclass(frozen=True)
class Submission:
    learner_id: str
    exercise_id: str
    code: str
    ts: int
    attempt_index: int


@dataclass(frozen=True)
class TestResult:
    case_index: int
    passed: bool
    inputs: tuple[str, ...]
    expected_output: tuple[str, ...]
    actual_output: str


class Classification:
    CORRECT = "Correct"
    WRONG = "Wrong"
    MISSING_LOGIC = "MissingLogic"


@dataclass(frozen=True)
class AssessmentOutcome:
    classification: str
    results: tuple[TestResult, ...]
    all_passed: bool


def normalize_output(text: str) -> list[str]:
    """Comparison form: per-line rstrip, trailing empty lines dropped."""
    return normalize_lines(text.split("\n"))


def normalize_lines(lines) -> list[str]:
    out = [line.rstrip() for line in lines]
    while out and out[-1] == "":
        out.pop()
    return out


def _execute(
    language_id: str, code: str, stdin_lines: tuple[str, ...], runner: RunnerConfig
) -> tuple[str, bool]:
    """Run code once; returns (raw stdout, ok) where ok=False means crash/timeout."""
    if language_id == IDENTITY_LANGUAGE:
        return code, True

    spec = runner.spec_for(language_id)
    if spec is None:
        raise RunnerError(f"no runner configured for language {language_id!r}")

    stdin_data = "\n".join(stdin_lines) + ("\n" if stdin_lines else "")
    with tempfile.TemporaryDirectory(prefix="adventure-run-") as tmp:
        src = Path(tmp) / "submission"
        src.write_text(code, encoding="utf-8")
        cmd = [part.replace("{file}", str(src)) for part in spec.cmd]
        try:
            proc = subprocess.run(
                cmd,
                input=stdin_data.encode("utf-8"),
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                timeout=spec.timeout_s,
            )
        except subprocess.TimeoutExpired:
            return "", False
        except (FileNotFoundError, PermissionError, OSError) as exc:
            raise RunnerError(f"failed to launch runner for {language_id!r}: {exc}") from exc
    stdout = proc.stdout[: spec.max_output_bytes].decode("utf-8", errors="replace")
    return stdout, proc.returncode == 0


def run_tests(exercise: Exercise, code: str, runner: RunnerConfig) -> list[TestResult]:
    """One TestResult per test case, in order; never raises on learner-code failure."""
    results = []
    for idx, case in enumerate(exercise.test_cases):
        stdout, ok = _execute(exercise.language_id, code, case.inputs, runner)
        actual_lines = normalize_output(stdout) if ok else []
        passed = ok and actual_lines == normalize_lines(case.expected_output)
        shown = "\n".join(actual_lines) if actual_lines else NO_OUTPUT_SENTINEL
        results.append(
            TestResult(
                case_index=idx,
                passed=passed,
                inputs=case.inputs,
                expected_output=case.expected_output,
                actual_output=shown,
            )
        )
    return results


def run_once(exercise: Exercise, code: str, runner: RunnerConfig) -> str:
    """Execute with test case 0's inputs and return raw output, unjudged."""
    case = exercise.test_cases[0]
    stdout, ok = _execute(exercise.language_id, code, case.inputs, runner)
    if not ok and not stdout:
        return NO_OUTPUT_SENTINEL
    return stdout


def code_tokens(code: str) -> set[str]:
    """Maximal runs of letters/digits/underscore, case-sensitive."""
    return set(_TOKEN_RE.findall(code))


def classify_submission(
    exercise: Exercise, code: str, results: list[TestResult]
) -> AssessmentOutcome:
    """Correct / Wrong / MissingLogic verdict for telemetry.

    MissingLogic wins over test outcomes: empty code, or code missing every
    alternative of any required marker set, is flagged even when the printed
    output happens to match.
    """
    all_passed = all(r.passed for r in results) and bool(results)
    if not code.strip():
        classification = Classification.MISSING_LOGIC
    else:
        tokens = code_tokens(code)
        hollow = any(group.isdisjoint(tokens) for group in exercise.required_markers)
        if hollow:
            classification = Classification.MISSING_LOGIC
        elif all_passed:
            classification = Classification.CORRECT
        else:
            classification = Classification.WRONG
    return AssessmentOutcome(
        classification=classification, results=tuple(results), all_passed=all_passed
    )


def failed_cases_view(results: list[TestResult]) -> list[dict]:
    """Only the failing cases, in case order, shaped for display."""
    view = []
    for r in results:
        if r.passed:
            continue
        view.append(
            {
                "case_index": r.case_index,
                "inputs": list(r.inputs),
                "expected_output": list(r.expected_output),
                "actual_output": r.actual_output,
            }
        )
    return view
