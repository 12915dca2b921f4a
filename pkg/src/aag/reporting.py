"""Student feedback documents and the teacher performance summary.

Output files: ``<student_id>.feedback.txt`` and ``<assignment_id>.summary.txt``.
Score spread is the population standard deviation; the median of an even
count averages the two middle values.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .llm_client import ChatClient, LLMError
from .model import SCALE_MAX, Assignment, GradeRecord
from .prompts import build_issue_summary_prompt
from .stats.analysis import histogram

logger = logging.getLogger(__name__)

NOT_GRADED = "not auto-graded"


def feedback_filename(student_id: str) -> str:
    return f"{student_id}.feedback.txt"


def summary_filename(assignment_id: str) -> str:
    return f"{assignment_id}.summary.txt"


def _bullets(items: Iterable[str], indent: str = "  ") -> list[str]:
    items = list(items)
    return [f"{indent}- {i}" for i in items] if items else [f"{indent}(none)"]


def render_student_feedback(records: Sequence[GradeRecord], assignment: Assignment) -> str:
    if not records:
        raise ValueError("no records for student")
    sid = records[0].student_id
    by_q = {r.question_id: r for r in records}
    out = [f"Feedback for {sid}", f"Assignment: {assignment.id}"]
    if assignment.course:
        out.append(f"Course: {assignment.course}")
    for q in assignment.questions:
        rec = by_q.get(q.id)
        if rec is None:
            continue
        out += ["", f"Question {q.id}: {q.text}"]
        if not rec.graded:
            out.append(f"Score: {NOT_GRADED} (your instructor will review this answer)")
            continue
        fb = rec.feedback
        out.append(f"Score: {rec.score}/{SCALE_MAX}")
        out.append("Errors identified:")
        out += _bullets(fb.errors_identified)
        out.append("Why these parts are incorrect:")
        out += [f"  {line}" for line in (fb.explanation or "(none)").splitlines()]
        out.append("How to improve:")
        out += _bullets(fb.suggestions)
    return "\n".join(out) + "\n"


@dataclass
class QuestionStats:
    question_id: str
    graded: int
    skipped: int
    mean: float | None
    median: float | None
    std: float | None
    histogram: list[int]


@dataclass
class PerformanceSummary:
    assignment_id: str
    submission_count: int
    questions: list[QuestionStats]
    total_mean: float | None = None
    total_median: float | None = None
    complete_submissions: int = 0
    common_issues: dict[str, list[str]] = field(default_factory=dict)


def _median(values: Sequence[float]) -> float:
    s = sorted(values)
    mid = len(s) // 2
    return float(s[mid]) if len(s) % 2 else (s[mid - 1] + s[mid]) / 2


def _describe(scores: Sequence[int]) -> tuple[float | None, float | None, float | None]:
    if not scores:
        return None, None, None
    n = len(scores)
    mean = math.fsum(scores) / n
    std = math.sqrt(math.fsum((s - mean) ** 2 for s in scores) / n)
    return mean, _median(scores), std


_ISSUE_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*\S)")


def parse_issue_list(reply: str) -> list[str]:
    return [m.group(1) for line in reply.splitlines() if (m := _ISSUE_RE.match(line))]


def build_performance_summary(
    records: Sequence[GradeRecord],
    assignment: Assignment,
    client: ChatClient | None = None,
    summarize: bool = False,
) -> PerformanceSummary:
    by_q: dict[str, list[GradeRecord]] = {q.id: [] for q in assignment.questions}
    for r in records:
        by_q.setdefault(r.question_id, []).append(r)
    students = {r.student_id for r in records}
    stats = []
    for qid, recs in by_q.items():
        scores = [r.score for r in recs if r.graded]
        mean, med, std = _describe(scores)
        stats.append(QuestionStats(qid, len(scores), len(recs) - len(scores), mean, med, std, histogram(scores)))
    totals: dict[str, int] = {}
    complete: set[str] = set(students)
    for r in records:
        if r.graded:
            totals[r.student_id] = totals.get(r.student_id, 0) + r.score
    for q in assignment.questions:
        graded = {r.student_id for r in by_q[q.id] if r.graded}
        complete &= graded
    total_scores = [totals[s] for s in sorted(complete)]
    summary = PerformanceSummary(
        assignment_id=assignment.id,
        submission_count=len(students),
        questions=stats,
        complete_submissions=len(complete),
    )
    if total_scores:
        summary.total_mean = math.fsum(total_scores) / len(total_scores)
        summary.total_median = _median(total_scores)
    if summarize:
        if client is None:
            raise ValueError("summarize=True needs a client")
        for q in assignment.questions:
            feedback = [r.feedback for r in by_q[q.id] if r.graded]
            if not feedback:
                continue
            try:
                reply = client.complete(build_issue_summary_prompt(q, feedback)).response
            except LLMError as exc:
                logger.warning("common-issue summary for %s failed: %s", q.id, exc)
                continue
            issues = parse_issue_list(reply)
            if issues:
                summary.common_issues[q.id] = issues
    return summary


def _num(x: float | None) -> str:
    return "-" if x is None else f"{x:.2f}"


def render_performance_summary(summary: PerformanceSummary) -> str:
    out = [f"Performance Summary: {summary.assignment_id}", ""]
    out.append("A. Assignment overview")
    out.append(f"  Submissions: {summary.submission_count}")
    if summary.submission_count == 0:
        out.append("  No submissions were graded.")
        return "\n".join(out) + "\n"
    out.append(f"  Fully graded submissions: {summary.complete_submissions}")
    max_total = SCALE_MAX * len(summary.questions)
    out.append(f"  Mean total score: {_num(summary.total_mean)} / {max_total}")
    out.append(f"  Median total score: {_num(summary.total_median)} / {max_total}")
    out += ["", "B. Question breakdown"]
    for q in summary.questions:
        out.append(
            f"  {q.question_id}: graded {q.graded}, skipped {q.skipped}, "
            f"mean {_num(q.mean)}, median {_num(q.median)}, std {_num(q.std)}"
        )
        out.append("    score: " + " ".join(f"{s:>3}" for s in range(SCALE_MAX + 1)))
        out.append("    count: " + " ".join(f"{c:>3}" for c in q.histogram))
    if summary.common_issues:
        out += ["", "C. Common issues"]
        for q in summary.questions:
            issues = summary.common_issues.get(q.question_id)
            if issues:
                out.append(f"  {q.question_id}:")
                out += [f"    {i}. {text}" for i, text in enumerate(issues, 1)]
    return "\n".join(out) + "\n"


def write_reports(
    records: Sequence[GradeRecord],
    assignment: Assignment,
    out_dir: str | Path,
    client: ChatClient | None = None,
    summarize: bool = False,
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    by_student: dict[str, list[GradeRecord]] = {}
    for r in records:
        by_student.setdefault(r.student_id, []).append(r)
    for sid in sorted(by_student):
        path = out_dir / feedback_filename(sid)
        path.write_text(render_student_feedback(by_student[sid], assignment), encoding="utf-8")
        written.append(path)
    summary = build_performance_summary(records, assignment, client, summarize)
    path = out_dir / summary_filename(assignment.id)
    path.write_text(render_performance_summary(summary), encoding="utf-8")
    written.append(path)
    return written
