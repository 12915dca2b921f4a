"""Deterministic construction of the three prompt kinds.

Wording lives in versioned template files under ``aag/templates``; bumping
``TEMPLATE_VERSION`` changes every fingerprint.

Fingerprint: SHA-256 (hex) over the UTF-8 transcript formed by concatenating,
for each message, ``role + "\\n" + content + "\\x1e"``.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Sequence

from .model import Feedback, MarkingScheme, Question

TEMPLATE_VERSION = "v1"

DEFAULT_ITEM_CHARS = 600
DEFAULT_TOTAL_CHARS = 60_000


class PromptKind(str, enum.Enum):
    REFINE = "Refine"
    EVALUATE = "Evaluate"
    SUMMARIZE = "Summarize"


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[Message, ...]
    kind: PromptKind

    def __post_init__(self) -> None:
        if not self.messages:
            raise PromptError("prompt has no messages")
        for m in self.messages:
            if m.role not in ("system", "user"):
                raise PromptError(f"unsupported role {m.role!r}")

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.messages)

    def with_user_message(self, content: str) -> "PromptBundle":
        return PromptBundle(self.messages + (Message("user", content),), self.kind)

    def as_payload(self) -> list[dict[str, str]]:
        return [{"role": m.role, "content": m.content} for m in self.messages]


def fingerprint(messages: Sequence[Message]) -> str:
    h = hashlib.sha256()
    for m in messages:
        h.update(f"{m.role}\n{m.content}\x1e".encode("utf-8"))
    return h.hexdigest()


@lru_cache(maxsize=None)
def template(name: str) -> Template:
    path = resources.files("aag.templates").joinpath(f"{name}.{TEMPLATE_VERSION}.txt")
    return Template(path.read_text(encoding="utf-8"))


def _render(name: str, **values: object) -> str:
    return template(name).substitute(**values)


def _marks(n: int) -> str:
    return f"{n} mark" if n == 1 else f"{n} marks"


def render_scheme(scheme: MarkingScheme) -> str:
    lines = []
    for i, crit in enumerate(scheme.criteria, 1):
        alts = crit.alternatives
        if len(alts) == 1 and alts[0].condition in ("", crit.description):
            lines.append(f"{i}. {crit.description} [{_marks(alts[0].marks)}]")
            continue
        lines.append(f"{i}. {crit.description} [up to {_marks(crit.max_marks)}]")
        for alt in alts:
            cond = f": {alt.condition}" if alt.condition else ""
            lines.append(f"   - {_marks(alt.marks)}{cond}")
    lines.append(f"Maximum total: {_marks(scheme.max_total)}")
    return "\n".join(lines)


def build_evaluation_prompt(
    course: str,
    background: str,
    qa_chain: Sequence[tuple[Question, str]],
    scheme: MarkingScheme,
    reference_solution: str | None = None,
) -> PromptBundle:
    """Prompt grading the last question of ``qa_chain``; earlier pairs are context."""
    if not qa_chain:
        raise PromptError("qa_chain is empty")
    focus = qa_chain[-1][0]
    if scheme.question_id != focus.id:
        raise PromptError(f"scheme is for {scheme.question_id!r} but the chain ends with {focus.id!r}")
    ids = [q.id for q, _ in qa_chain]
    if len(set(ids)) != len(ids):
        raise PromptError("qa_chain repeats a question")
    pairs = "".join(
        _render("evaluate_pair", question_id=q.id, question_text=q.text, answer=answer)
        for q, answer in qa_chain
    )
    reference = _render("reference", reference_solution=reference_solution) if reference_solution else ""
    user = _render(
        "evaluate_user",
        background=background or "(none)",
        qa_pairs=pairs,
        focus_id=focus.id,
        scheme=render_scheme(scheme),
        reference=reference,
    )
    system = _render("evaluate_system", course=course)
    return PromptBundle((Message("system", system), Message("user", user)), PromptKind.EVALUATE)


def format_reminder() -> str:
    return _render("format_reminder")


def build_refinement_prompt(
    question: Question,
    draft_scheme: MarkingScheme | None = None,
    reference_solution: str | None = None,
    course: str = "",
) -> PromptBundle:
    if draft_scheme is not None:
        instruction = (
            "Refine the draft marking scheme above into a concrete marking scheme for this question. "
            "Keep its intent, make vague criteria specific, and assign marks to every criterion."
        )
        draft = _render("refine_draft", scheme=render_scheme(draft_scheme))
    else:
        instruction = "Write a concrete marking scheme for this question."
        draft = ""
    reference = _render("reference", reference_solution=reference_solution) if reference_solution else ""
    user = _render(
        "refine_user",
        background=question.background or "(none)",
        question_id=question.id,
        question_text=question.text,
        draft=draft,
        reference=reference,
        instruction=instruction,
    )
    system = _render("refine_system", course_clause=f' for the course "{course}"' if course else "")
    return PromptBundle((Message("system", system), Message("user", user)), PromptKind.REFINE)


def _feedback_item(fb: Feedback, cap: int) -> str:
    parts = []
    if fb.errors_identified:
        parts.append("errors: " + "; ".join(fb.errors_identified))
    if fb.explanation:
        parts.append("why: " + fb.explanation)
    if fb.suggestions:
        parts.append("improve: " + "; ".join(fb.suggestions))
    text = " | ".join(parts).replace("\n", " ") or "(no feedback text)"
    return text if len(text) <= cap else text[: max(cap - 3, 0)] + "..."


def build_issue_summary_prompt(
    question: Question,
    feedback_corpus: Sequence[Feedback],
    item_chars: int = DEFAULT_ITEM_CHARS,
    total_chars: int = DEFAULT_TOTAL_CHARS,
) -> PromptBundle:
    """Ask for a ranked list of common problems across all feedback for a question.

    Items are clipped to ``item_chars``; once ``total_chars`` is reached the
    remaining (newest) items are dropped and the omission is stated.
    """
    if not feedback_corpus:
        raise PromptError("feedback corpus is empty")
    lines: list[str] = []
    used = 0
    for i, fb in enumerate(feedback_corpus, 1):
        line = f"{i}. {_feedback_item(fb, item_chars)}"
        if lines and used + len(line) + 1 > total_chars:
            break
        lines.append(line)
        used += len(line) + 1
    dropped = len(feedback_corpus) - len(lines)
    user = _render(
        "summary_user",
        question_id=question.id,
        question_text=question.text,
        count_label="1 item" if len(lines) == 1 else f"{len(lines)} items",
        omitted=f", {dropped} omitted for length" if dropped else "",
        items="\n".join(lines),
    )
    system = _render("summary_system")
    return PromptBundle((Message("system", system), Message("user", user)), PromptKind.SUMMARIZE)
