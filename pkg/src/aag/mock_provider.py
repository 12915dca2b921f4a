"""Deterministic offline provider for tests and ``--mock`` runs."""

from __future__ import annotations

import json
import threading
import time
from typing import Callable, Iterable, Mapping

from .llm_client import LLMError, ProviderConfig, Usage
from .prompts import PromptBundle, PromptKind


def _digit(fp: str, start: int, mod: int) -> int:
    return int(fp[start : start + 8], 16) % mod


def synthesize_reply(prompt: PromptBundle) -> str:
    """Well-formed reply for ``prompt.kind``, a pure function of the fingerprint."""
    fp = prompt.fingerprint
    if prompt.kind is PromptKind.EVALUATE:
        score = 1 + _digit(fp, 0, 10)
        if score == 10:
            errors = "- None"
            why = "No issues: the answer meets every criterion of the marking scheme."
        else:
            errors = f"- Criterion {1 + _digit(fp, 8, 4)} is only partly addressed.\n- The justification is brief."
            why = f"The answer earns {score} of 10 marks because some criteria are not fully justified."
        improve = f"- Expand the reasoning for each criterion (ref {fp[:8]}).\n- Tie each claim back to the question context."
        return f"SCORE: {score}/10\nERRORS:\n{errors}\nWHY:\n{why}\nIMPROVE:\n{improve}\n"
    if prompt.kind is PromptKind.REFINE:
        first = 2 + _digit(fp, 0, 3)
        return json.dumps(
            {
                "criteria": [
                    {
                        "description": "Chooses an appropriate approach",
                        "alternatives": [
                            {"marks": first, "condition": "the approach is the most suitable one"},
                            {"marks": first - 1, "condition": "the approach is acceptable but not the best"},
                        ],
                    },
                    {
                        "description": "Justifies the choice",
                        "alternatives": [{"marks": 6 - first, "condition": "clear, correct justification"}],
                    },
                    {
                        "description": "Discusses practical feasibility",
                        "alternatives": [{"marks": 4, "condition": "feasibility is discussed with an example"}],
                    },
                ]
            }
        )
    n = 2 + _digit(fp, 0, 3)
    return "\n".join(f"- Common issue {i + 1}: incomplete justification (group {fp[i:i + 4]})" for i in range(n)) + "\n"


class MockProvider:
    """Scripted replies keyed by prompt fingerprint, with a synthesizing fallback.

    ``failures`` are raised, in order, before any reply is produced; this is
    how tests inject throttling or auth errors. ``latency`` adds a sleep per
    call so concurrency can be observed via ``max_in_flight``.
    """

    def __init__(
        self,
        script: Mapping[str, str] | None = None,
        fallback: Callable[[PromptBundle], str] = synthesize_reply,
        failures: Iterable[LLMError] = (),
        latency: float = 0.0,
    ):
        self.script = dict(script or {})
        self.fallback = fallback
        self._failures = list(failures)
        self.latency = latency
        self.calls = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self.prompts: list[PromptBundle] = []
        self._lock = threading.Lock()

    def complete(self, prompt: PromptBundle, config: ProviderConfig) -> tuple[str, Usage]:
        with self._lock:
            self.calls += 1
            self.prompts.append(prompt)
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            failure = self._failures.pop(0) if self._failures else None
        try:
            if self.latency:
                time.sleep(self.latency)
            if failure is not None:
                raise failure
            text = self.script.get(prompt.fingerprint)
            if text is None:
                text = self.fallback(prompt)
            chars = sum(len(m.content) for m in prompt.messages)
            return text, Usage(prompt_tokens=chars // 4, completion_tokens=len(text) // 4)
        finally:
            with self._lock:
                self.in_flight -= 1


def mock_provider(script: Mapping[str, str] | None = None, fallback: Callable[[PromptBundle], str] = synthesize_reply) -> MockProvider:
    return MockProvider(script, fallback)
