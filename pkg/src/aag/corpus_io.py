"""Readers and writers for on-disk artifacts.

Formats (all UTF-8):

* assignment file: one JSON object, see ``schemas/assignment.schema.json``
* submissions file: JSON array, see ``schemas/submissions.schema.json``
* grade records: JSON Lines, one object per line, fixed key order
* survey file: CSV with header ``student_id,q1..q9,q10,score``
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import jsonschema

from .model import (
    LIKERT_ITEMS,
    Alternative,
    Assignment,
    Choice,
    Criterion,
    Feedback,
    GradeRecord,
    Grader,
    GradeStatus,
    MarkingScheme,
    Question,
    Submission,
    SurveyResponse,
    ValidationError,
    validate_marking_scheme,
)

logger = logging.getLogger(__name__)

SURVEY_HEADER = ("student_id", *(f"q{i}" for i in range(1, 10)), "q10", "score")


class CorpusError(ValueError):
    """Malformed or inconsistent input file. ``locus`` names the line/field."""

    def __init__(self, message: str, locus: str = ""):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


class SemanticError(CorpusError):
    pass


@dataclass(frozen=True)
class CorpusPaths:
    assignment_file: Path
    submissions_file: Path
    grades_out: Path
    human_grades_file: Path | None = None
    survey_file: Path | None = None


@dataclass(frozen=True)
class MalformedLine:
    line_no: int
    reason: str


@lru_cache(maxsize=None)
def _schema(name: str) -> dict:
    text = resources.files("aag.schemas").joinpath(f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def _read_json(path: str | os.PathLike, schema: str) -> Any:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CorpusError(f"cannot read file: {exc.strerror}", str(path)) from exc
    try:
        data = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise CorpusError(f"not UTF-8 (byte {exc.start})", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise CorpusError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    except RecursionError:
        raise CorpusError("nesting too deep", str(path)) from None
    _check_schema(data, schema, str(path))
    return data


def _check_schema(data: Any, schema: str, where: str) -> None:
    validator = jsonschema.Draft202012Validator(_schema(schema))
    error = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if error is not None:
        field_path = "/".join(str(p) for p in error.absolute_path) or "<root>"
        raise CorpusError(error.message, f"{where}#{field_path}")


# -- marking schemes ---------------------------------------------------------

def scheme_from_dict(data: dict, question_id: str) -> MarkingScheme:
    criteria = tuple(
        Criterion(
            description=c["description"],
            alternatives=tuple(
                Alternative(marks=a["marks"], condition=a.get("condition", ""))
                for a in c["alternatives"]
            ),
        )
        for c in data["criteria"]
    )
    return MarkingScheme(question_id=question_id, criteria=criteria, refined=bool(data.get("refined", False)))


def scheme_to_dict(scheme: MarkingScheme) -> dict:
    return {
        "refined": scheme.refined,
        "criteria": [
            {
                "description": c.description,
                "alternatives": [{"marks": a.marks, "condition": a.condition} for a in c.alternatives],
            }
            for c in scheme.criteria
        ],
    }


def parse_scheme_json(text: str, question: Question) -> MarkingScheme:
    """Parse a standalone scheme object (as produced by the refinement model)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(exc.msg, f"scheme:{exc.lineno}:{exc.colno}") from exc
    sub = _schema("assignment")
    validator = jsonschema.Draft202012Validator({**sub["$defs"]["scheme"], "$defs": sub["$defs"]})
    error = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if error is not None:
        raise CorpusError(error.message, "scheme#" + "/".join(map(str, error.absolute_path)))
    scheme = scheme_from_dict(data, question.id)
    report = validate_marking_scheme(scheme, question)
    if not report.ok:
        raise SemanticError("; ".join(report.reasons), f"scheme for {question.id}")
    return scheme


# -- assignments -------------------------------------------------------------

def parse_assignment(path: str | os.PathLike) -> Assignment:
    data = _read_json(path, "assignment")
    questions: list[Question] = []
    schemes: dict[str, MarkingScheme] = {}
    seen: set[str] = set()
    for i, q in enumerate(data["questions"]):
        locus = f"{path}#questions/{i}"
        qid = q["id"]
        if qid in seen:
            raise SemanticError(f"duplicate question id {qid!r}", locus)
        for dep in q.get("depends_on", []):
            if dep not in seen:
                raise SemanticError(f"depends_on {dep!r} is not an earlier question", locus)
        try:
            question = Question(
                id=qid,
                text=q["text"],
                background=q.get("background", ""),
                depends_on=tuple(q.get("depends_on", [])),
                reference_solution=q.get("reference_solution"),
            )
        except ValidationError as exc:
            raise SemanticError(str(exc), locus) from exc
        seen.add(qid)
        questions.append(question)
        if q.get("marking_scheme") is not None:
            scheme = scheme_from_dict(q["marking_scheme"], qid)
            report = validate_marking_scheme(scheme, question)
            if not report.ok:
                raise SemanticError("; ".join(report.reasons), f"{locus}/marking_scheme")
            schemes[qid] = scheme
    assignment = Assignment(
        id=data["assignment_id"], course=data.get("course", ""), questions=tuple(questions), schemes=schemes
    )
    missing = assignment.needs_refinement()
    if missing:
        logger.info("questions without a marking scheme (need refinement): %s", ", ".join(missing))
    return assignment


def assignment_to_dict(assignment: Assignment) -> dict:
    questions = []
    for q in assignment.questions:
        entry: dict[str, Any] = {"id": q.id, "background": q.background, "text": q.text}
        if q.depends_on:
            entry["depends_on"] = list(q.depends_on)
        entry["scale_max"] = q.scale_max
        if q.reference_solution is not None:
            entry["reference_solution"] = q.reference_solution
        scheme = assignment.schemes.get(q.id)
        entry["marking_scheme"] = scheme_to_dict(scheme) if scheme else None
        questions.append(entry)
    return {"assignment_id": assignment.id, "course": assignment.course, "questions": questions}


def write_assignment(assignment: Assignment, path: str | os.PathLike) -> None:
    text = json.dumps(assignment_to_dict(assignment), indent=2, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


# -- submissions -------------------------------------------------------------

def parse_submissions(path: str | os.PathLike, assignment: Assignment | None = None) -> list[Submission]:
    data = _read_json(path, "submissions")
    if not data:
        logger.warning("%s contains no submissions", path)
    known = {q.id for q in assignment.questions} if assignment else None
    seen: set[str] = set()
    out = []
    for i, item in enumerate(data):
        sid = item["student_id"]
        if sid in seen:
            raise SemanticError(f"duplicate student_id {sid!r}", f"{path}#{i}")
        seen.add(sid)
        answers = {k: (v or "") for k, v in item["answers"].items()}
        if known is not None:
            unknown = sorted(set(answers) - known)
            if unknown:
                raise SemanticError(f"answers for unknown question(s) {unknown}", f"{path}#{i}")
            answers = {q.id: answers.get(q.id, "") for q in assignment.questions}
        out.append(Submission(student_id=sid, answers=answers))
    return out


def write_submissions(submissions: Iterable[Submission], path: str | os.PathLike) -> None:
    data = [{"student_id": s.student_id, "answers": dict(s.answers)} for s in submissions]
    Path(path).write_text(json.dumps(data, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


# -- grade records -----------------------------------------------------------

def record_to_dict(record: GradeRecord) -> dict:
    fb = record.feedback
    return {
        "student_id": record.student_id,
        "question_id": record.question_id,
        "status": record.status.value,
        "score": record.score,
        "feedback": {
            "errors_identified": list(fb.errors_identified),
            "explanation": fb.explanation,
            "suggestions": list(fb.suggestions),
        },
        "grader": record.grader.value,
        "model_id": record.model_id,
        "prompt_fingerprint": record.prompt_fingerprint,
        "timestamp": record.timestamp,
    }


def record_from_dict(data: dict) -> GradeRecord:
    fb = data.get("feedback") or {}
    return GradeRecord(
        student_id=data["student_id"],
        question_id=data["question_id"],
        score=data["score"],
        feedback=Feedback(
            errors_identified=tuple(fb.get("errors_identified", ())),
            explanation=fb.get("explanation", ""),
            suggestions=tuple(fb.get("suggestions", ())),
        ),
        grader=Grader(data["grader"]),
        model_id=data.get("model_id", ""),
        prompt_fingerprint=data.get("prompt_fingerprint", ""),
        timestamp=data.get("timestamp", ""),
        status=GradeStatus(data["status"]),
    )


def record_line(record: GradeRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False, separators=(",", ":")) + "\n"


def canonical_line(record: GradeRecord) -> str:
    """Line form with the timestamp blanked, for determinism comparisons."""
    d = record_to_dict(record)
    d["timestamp"] = ""
    return json.dumps(d, ensure_ascii=False, separators=(",", ":")) + "\n"


class GradeWriter:
    """Single-writer, append-only JSON Lines sink. Callers serialize writes."""

    def __init__(self, path: str | os.PathLike, append: bool = True):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if append and self.path.exists():
            _drop_partial_tail(self.path)
        self._fh = open(self.path, "a" if append else "w", encoding="utf-8", newline="\n")

    def write(self, record: GradeRecord) -> None:
        self._fh.write(record_line(record))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "GradeWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _drop_partial_tail(path: Path) -> None:
    # a crash mid-write leaves a line without its newline
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        cut = data.rfind(b"\n") + 1
        logger.warning("%s: discarding truncated final line", path)
        with open(path, "r+b") as fh:
            fh.truncate(cut)


def write_grade_records(records: Iterable[GradeRecord], path: str | os.PathLike, append: bool = False) -> None:
    with GradeWriter(path, append=append) as writer:
        for r in records:
            writer.write(r)


def read_grade_records(path: str | os.PathLike) -> tuple[list[GradeRecord], list[MalformedLine]]:
    """Read a grade file. Malformed lines are reported, not fatal."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CorpusError(f"cannot read file: {exc.strerror}", str(path)) from exc
    records: list[GradeRecord] = []
    bad: list[MalformedLine] = []
    for no, line in enumerate(raw.split(b"\n"), 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line.decode("utf-8"))
            _check_schema(data, "grade_record", f"line {no}")
            records.append(record_from_dict(data))
        except (UnicodeDecodeError, json.JSONDecodeError, CorpusError, ValidationError, ValueError, KeyError) as exc:
            bad.append(MalformedLine(no, str(exc)))
    for m in bad:
        logger.warning("%s:%d: malformed grade record: %s", path, m.line_no, m.reason)
    return records, bad


# -- survey ------------------------------------------------------------------

def parse_survey(path: str | os.PathLike) -> list[SurveyResponse]:
    try:
        text = Path(path).read_bytes().decode("utf-8-sig")
    except OSError as exc:
        raise CorpusError(f"cannot read file: {exc.strerror}", str(path)) from exc
    except UnicodeDecodeError as exc:
        raise CorpusError(f"not UTF-8 (byte {exc.start})", str(path)) from exc
    try:
        rows = list(csv.reader(io.StringIO(text, newline="")))
    except csv.Error as exc:
        raise CorpusError(str(exc), str(path)) from exc
    if not rows:
        raise CorpusError("empty survey file", str(path))
    header = [h.strip().lower() for h in rows[0]]
    missing = [h for h in SURVEY_HEADER if h not in header]
    if missing:
        raise CorpusError(f"header lacks column(s) {missing}", f"{path}:1")
    col = {h: header.index(h) for h in SURVEY_HEADER}
    out = []
    seen: set[str] = set()
    for line_no, row in enumerate(rows[1:], 2):
        if not any(cell.strip() for cell in row):
            continue
        locus = f"{path}:{line_no}"
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        sid = row[col["student_id"]].strip()
        if not sid:
            raise CorpusError("missing student_id", locus)
        if sid in seen:
            raise SemanticError(f"duplicate student_id {sid!r}", locus)
        seen.add(sid)
        likert: dict[str, int | None] = {}
        for item in LIKERT_ITEMS:
            cell = row[col[item.lower()]].strip()
            if not cell:
                likert[item] = None
                continue
            try:
                value = int(cell)
            except ValueError:
                raise CorpusError(f"{item} value {cell!r} is not an integer", locus) from None
            if not 1 <= value <= 5:
                raise CorpusError(f"{item} value {value} outside 1..5", locus)
            likert[item] = value
        q10 = row[col["q10"]].strip().upper()
        if q10 and q10 not in ("TA", "AAG"):
            raise CorpusError(f"Q10 value {q10!r} must be TA, AAG or blank", locus)
        score_cell = row[col["score"]].strip()
        try:
            score = float(score_cell)
        except ValueError:
            raise CorpusError(f"score {score_cell!r} is not numeric", locus) from None
        if score != score:
            raise CorpusError("score is NaN", locus)
        out.append(SurveyResponse(sid, likert, Choice(q10) if q10 else None, score))
    return out


def write_survey(responses: Iterable[SurveyResponse], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SURVEY_HEADER)
        for r in responses:
            cells = [r.student_id]
            cells += ["" if r.likert.get(i) is None else str(r.likert[i]) for i in LIKERT_ITEMS]
            cells.append(r.q10_choice.value if r.q10_choice else "")
            score = r.assignment_score
            cells.append(str(int(score)) if float(score).is_integer() else repr(score))
            w.writerow(cells)


def item_counts(responses: Iterable[SurveyResponse]) -> dict[str, int]:
    """Available (non-missing) responses per item, Q1..Q10."""
    responses = list(responses)
    counts = {i: sum(r.likert.get(i) is not None for r in responses) for i in LIKERT_ITEMS}
    counts["Q10"] = sum(r.q10_choice is not None for r in responses)
    return counts
