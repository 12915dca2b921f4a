"""Refinement and grading orchestration over a corpus of submissions."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

from .corpus_io import CorpusError, GradeWriter, parse_scheme_json, read_grade_records
from .llm_client import AuthError, ChatClient, LLMError
from .model import (
    SCALE_MAX,
    Assignment,
    Feedback,
    GradeRecord,
    Grader,
    GradeStatus,
    MarkingScheme,
    Question,
    Submission,
)
from .prompts import PromptBundle, build_evaluation_prompt, build_refinement_prompt, format_reminder

logger = logging.getLogger(__name__)

NO_ISSUES = "No issues identified."
SCHEME_REMINDER = (
    "Your previous reply could not be used. Reply with only the JSON object described above; "
    "the largest alternative of each criterion must sum to exactly 10."
)


class GradingError(Exception):
    pass


class SchemeGenerationFailed(GradingError):
    pass


class EvaluationParseError(ValueError):
    pass


class NoScore(EvaluationParseError):
    pass


class ScoreOutOfRange(EvaluationParseError):
    pass


class NoSections(EvaluationParseError):
    pass


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class GradingRunConfig:
    refine_schemes: bool = False
    max_parse_retries: int = 2
    resume: bool = False
    clock: Callable[[], str] = _utc_now

    def __post_init__(self) -> None:
        if self.max_parse_retries < 0:
            raise ValueError("max_parse_retries must be >= 0")


# -- reply parsing -----------------------------------------------------------

_SCORE_RE = re.compile(r"^[\s*#_]*score[\s*_]*:[\s*_]*(-?\d+)\s*/\s*10\b", re.IGNORECASE | re.MULTILINE)
_HEADER_RE = re.compile(r"^[\s*#_]*(errors|why|improve)[\s*_]*:[\s*_]*(.*)$", re.IGNORECASE | re.MULTILINE)
_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")
_EMPTY_ITEMS = {"none", "none.", "n/a", "nil", "no errors", "no errors."}


def _items(body: str) -> tuple[str, ...]:
    out = []
    for line in body.splitlines():
        item = _BULLET_RE.sub("", line).strip()
        if item and item.lower() not in _EMPTY_ITEMS:
            out.append(item)
    return tuple(out)


def parse_llm_evaluation(reply: str) -> tuple[int, Feedback]:
    """Extract ``SCORE: k/10`` and the ERRORS / WHY / IMPROVE sections."""
    m = _SCORE_RE.search(reply)
    if m is None:
        raise NoScore("no 'SCORE: k/10' line in reply")
    score = int(m.group(1))
    if not 0 <= score <= SCALE_MAX:
        raise ScoreOutOfRange(f"score {score} outside 0..{SCALE_MAX}")
    headers = list(_HEADER_RE.finditer(reply))
    if not headers:
        raise NoSections("none of ERRORS/WHY/IMPROVE present")
    sections: dict[str, str] = {}
    for i, h in enumerate(headers):
        end = headers[i + 1].start() if i + 1 < len(headers) else len(reply)
        name = h.group(1).lower()
        if name not in sections:
            sections[name] = (h.group(2) + "\n" + reply[h.end() : end]).strip()
    if "improve" not in sections and "why" in sections:
        logger.warning("reply has WHY but no IMPROVE section; suggestions left empty")
    errors = _items(sections.get("errors", ""))
    explanation = sections.get("why", "").strip()
    suggestions = _items(sections.get("improve", ""))
    if not errors and not suggestions and not explanation:
        explanation = NO_ISSUES
    return score, Feedback(errors, explanation, suggestions)


# -- scheme refinement -------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _json_candidates(reply: str) -> list[str]:
    out = [reply.strip()]
    out += [m.group(1).strip() for m in _FENCE_RE.finditer(reply)]
    lo, hi = reply.find("{"), reply.rfind("}")
    if 0 <= lo < hi:
        out.append(reply[lo : hi + 1])
    return out


def parse_scheme_reply(reply: str, question: Question) -> MarkingScheme:
    last: Exception | None = None
    for text in _json_candidates(reply):
        try:
            return parse_scheme_json(text, question)
        except CorpusError as exc:
            last = exc
    raise CorpusError(f"no valid scheme in reply ({last})")


def refine_scheme(
    question: Question,
    draft: MarkingScheme | None,
    client: ChatClient,
    max_parse_retries: int = 2,
    course: str = "",
) -> MarkingScheme:
    """Generate (no draft) or refine (draft given) a scheme whose maxima sum to 10.

    Malformed replies are re-asked up to ``max_parse_retries`` times; after
    that the draft comes back unchanged, or :class:`SchemeGenerationFailed`
    is raised when there is no draft.
    """
    bundle = build_refinement_prompt(question, draft, question.reference_solution, course)
    for attempt in range(max_parse_retries + 1):
        reply = client.complete(bundle).response
        try:
            return replace(parse_scheme_reply(reply, question), refined=True)
        except CorpusError as exc:
            logger.warning("question %s: unusable scheme reply (attempt %d): %s", question.id, attempt + 1, exc)
        if attempt == 0:
            bundle = bundle.with_user_message(SCHEME_REMINDER)
    if draft is not None:
        logger.warning("question %s: keeping the draft scheme unchanged", question.id)
        return draft
    raise SchemeGenerationFailed(f"question {question.id}: no valid scheme after {max_parse_retries + 1} attempts")


def refine_assignment(assignment: Assignment, client: ChatClient, max_parse_retries: int = 2) -> Assignment:
    schemes = {
        q.id: refine_scheme(q, assignment.schemes.get(q.id), client, max_parse_retries, assignment.course)
        for q in assignment.questions
    }
    return replace(assignment, schemes=schemes)


# -- grading -----------------------------------------------------------------

def evaluation_prompt_for(assignment: Assignment, submission: Submission, qid: str) -> PromptBundle:
    chain = assignment.chain(qid)
    backgrounds: list[str] = []
    for q in chain:
        if q.background and q.background not in backgrounds:
            backgrounds.append(q.background)
    return build_evaluation_prompt(
        course=assignment.course,
        background="\n\n".join(backgrounds),
        qa_chain=[(q, submission.answer(q.id)) for q in chain],
        scheme=assignment.schemes[qid],
        reference_solution=chain[-1].reference_solution,
    )


@dataclass
class _SubmissionResult:
    records: list[GradeRecord] = field(default_factory=list)
    tokens: int = 0
    error: LLMError | None = None


def _grade_one(
    submission: Submission,
    assignment: Assignment,
    client: ChatClient,
    config: GradingRunConfig,
    done: frozenset[tuple[str, str]] = frozenset(),
) -> _SubmissionResult:
    result = _SubmissionResult()
    for question in assignment.questions:
        if (submission.student_id, question.id) in done:
            continue
        base = evaluation_prompt_for(assignment, submission, question.id)
        bundle = base
        parsed = None
        try:
            for attempt in range(config.max_parse_retries + 1):
                exchange = client.complete(bundle)
                result.tokens += exchange.usage.total
                try:
                    parsed = parse_llm_evaluation(exchange.response)
                    break
                except EvaluationParseError as exc:
                    logger.warning(
                        "%s/%s: unparseable reply (attempt %d): %s",
                        submission.student_id, question.id, attempt + 1, exc,
                    )
                    bundle = base.with_user_message(format_reminder())
        except LLMError as exc:
            result.error = exc
            return result
        common = dict(
            student_id=submission.student_id,
            question_id=question.id,
            grader=Grader.AAG,
            model_id=client.model_id,
            prompt_fingerprint=bundle.fingerprint,
            timestamp=config.clock(),
        )
        if parsed is None:
            result.records.append(GradeRecord(score=None, status=GradeStatus.SKIPPED, **common))
        else:
            score, feedback = parsed
            result.records.append(GradeRecord(score=score, feedback=feedback, **common))
    return result


def _require_schemes(assignment: Assignment) -> None:
    missing = assignment.needs_refinement()
    if missing:
        raise GradingError(f"no marking scheme for {', '.join(missing)}; run refinement first")


def grade_submission(
    submission: Submission,
    assignment: Assignment,
    client: ChatClient,
    run_config: GradingRunConfig = GradingRunConfig(),
) -> list[GradeRecord]:
    """One record per question; each prompt carries its predecessors' Q&A."""
    _require_schemes(assignment)
    result = _grade_one(submission, assignment, client, run_config)
    if result.error is not None:
        raise result.error
    return result.records


@dataclass
class RunReport:
    grades_path: str
    submissions: int
    attempted: int
    graded: int
    skipped: int
    failed: int
    resumed: int
    total_tokens: int
    failures: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def report_path_for(grades_path: str | Path) -> Path:
    p = Path(grades_path)
    return p.with_name(p.name + ".report.json")


def grade_corpus(
    submissions: Sequence[Submission],
    assignment: Assignment,
    client: ChatClient,
    run_config: GradingRunConfig,
    out_path: str | Path,
) -> RunReport:
    """Grade every (student, question) pair, appending records as they complete.

    Submissions run in parallel (bounded by the client's ``max_concurrency``);
    records are written in submission order by a single writer. With
    ``resume`` set, pairs already present in ``out_path`` are skipped.
    """
    if run_config.refine_schemes:
        assignment = refine_assignment(assignment, client, run_config.max_parse_retries)
    _require_schemes(assignment)
    out_path = Path(out_path)
    done: set[tuple[str, str]] = set()
    if run_config.resume and out_path.exists():
        existing, _ = read_grade_records(out_path)
        done = {r.key for r in existing}
        logger.info("resuming: %d pairs already recorded", len(done))
    done_frozen = frozenset(done)
    report = RunReport(str(out_path), len(submissions), 0, 0, 0, 0, len(done), 0)
    writer = GradeWriter(out_path, append=run_config.resume)
    workers = max(1, client.config.max_concurrency)
    pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="grade")
    try:
        futures = [
            pool.submit(_grade_one, s, assignment, client, run_config, done_frozen) for s in submissions
        ]
        for sub, fut in zip(submissions, futures):
            res = fut.result()
            for rec in res.records:
                writer.write(rec)
                report.attempted += 1
                if rec.graded:
                    report.graded += 1
                else:
                    report.skipped += 1
            report.total_tokens += res.tokens
            if res.error is not None:
                if isinstance(res.error, AuthError):
                    for f in futures:
                        f.cancel()
                    raise res.error
                pending = sum(1 for q in assignment.questions if (sub.student_id, q.id) not in done) - len(res.records)
                report.attempted += pending
                report.failed += pending
                report.failures.append({"student_id": sub.student_id, "error": f"{type(res.error).__name__}: {res.error}"})
    finally:
        pool.shutdown(wait=True, cancel_futures=True)
        writer.close()
    report_path_for(out_path).write_text(report.to_json() + "\n", encoding="utf-8")
    return report
