"""Domain types shared across the grading pipeline.

All types are frozen dataclasses; construct them through the parsers in
:mod:`aag.corpus_io` or directly in code.
"""

from __future__ import annotations

import enum
import logging
import statistics
from dataclasses import dataclass, field
from typing import Iterable

logger = logging.getLogger(__name__)

SCALE_MAX = 10
LIKERT_ITEMS = tuple(f"Q{i}" for i in range(1, 10))


class ValidationError(ValueError):
    """Raised when a domain object violates its invariants."""


class Grader(str, enum.Enum):
    AAG = "AAG"
    HUMAN = "Human"


class GradeStatus(str, enum.Enum):
    GRADED = "graded"
    SKIPPED = "skipped"


class Choice(str, enum.Enum):
    TA = "TA"
    AAG = "AAG"


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    background: str = ""
    depends_on: tuple[str, ...] = ()
    scale_max: int = SCALE_MAX
    reference_solution: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("question id must be nonempty")
        if self.scale_max != SCALE_MAX:
            raise ValidationError(f"question {self.id}: scale_max must be {SCALE_MAX}")
        if len(set(self.depends_on)) != len(self.depends_on):
            raise ValidationError(f"question {self.id}: duplicate depends_on entries")
        if self.id in self.depends_on:
            raise ValidationError(f"question {self.id}: depends on itself")


@dataclass(frozen=True)
class Alternative:
    marks: int
    condition: str


@dataclass(frozen=True)
class Criterion:
    description: str
    alternatives: tuple[Alternative, ...]

    @property
    def max_marks(self) -> int:
        return max((a.marks for a in self.alternatives), default=0)


@dataclass(frozen=True)
class MarkingScheme:
    question_id: str
    criteria: tuple[Criterion, ...]
    refined: bool = False

    @property
    def max_total(self) -> int:
        return sum(c.max_marks for c in self.criteria)


@dataclass(frozen=True)
class SchemeReport:
    ok: bool
    max_total: int
    reasons: tuple[str, ...] = ()


def validate_marking_scheme(scheme: MarkingScheme, question: Question) -> SchemeReport:
    """Check a scheme against its question; never raises."""
    reasons = []
    if scheme.question_id != question.id:
        reasons.append(
            f"scheme belongs to {scheme.question_id!r}, not {question.id!r}"
        )
    if not scheme.criteria:
        reasons.append("no criteria")
    for i, crit in enumerate(scheme.criteria, 1):
        if not crit.alternatives:
            reasons.append(f"criterion {i} has no alternatives")
        for alt in crit.alternatives:
            if not isinstance(alt.marks, int) or isinstance(alt.marks, bool):
                reasons.append(f"criterion {i}: non-integer marks {alt.marks!r}")
            elif alt.marks < 0:
                reasons.append(f"criterion {i}: negative marks {alt.marks}")
            elif alt.marks > question.scale_max:
                reasons.append(f"criterion {i}: marks {alt.marks} exceed {question.scale_max}")
    total = scheme.max_total
    if scheme.criteria and total != question.scale_max:
        reasons.append(f"max total {total} != {question.scale_max}")
    return SchemeReport(ok=not reasons, max_total=total, reasons=tuple(reasons))


@dataclass(frozen=True)
class Assignment:
    id: str
    course: str
    questions: tuple[Question, ...]
    schemes: dict[str, MarkingScheme] = field(default_factory=dict)

    def question(self, qid: str) -> Question:
        for q in self.questions:
            if q.id == qid:
                return q
        raise KeyError(qid)

    def needs_refinement(self) -> list[str]:
        return [q.id for q in self.questions if q.id not in self.schemes]

    def chain(self, qid: str) -> list[Question]:
        """Predecessors named in ``depends_on`` (in order), then the question."""
        q = self.question(qid)
        return [self.question(d) for d in q.depends_on] + [q]


@dataclass(frozen=True)
class Submission:
    student_id: str
    answers: dict[str, str]

    def answer(self, qid: str) -> str:
        return self.answers.get(qid, "")


@dataclass(frozen=True)
class Feedback:
    errors_identified: tuple[str, ...] = ()
    explanation: str = ""
    suggestions: tuple[str, ...] = ()


@dataclass(frozen=True)
class GradeRecord:
    student_id: str
    question_id: str
    score: int | None
    feedback: Feedback = Feedback()
    grader: Grader = Grader.AAG
    model_id: str = ""
    prompt_fingerprint: str = ""
    timestamp: str = ""
    status: GradeStatus = GradeStatus.GRADED

    def __post_init__(self) -> None:
        if self.status is GradeStatus.GRADED:
            if not isinstance(self.score, int) or not 0 <= self.score <= SCALE_MAX:
                raise ValidationError(f"score {self.score!r} outside [0, {SCALE_MAX}]")
        elif self.score is not None:
            raise ValidationError("skipped records carry no score")
        if self.grader is Grader.AAG and (not self.model_id or not self.prompt_fingerprint):
            raise ValidationError("AAG records need model_id and prompt_fingerprint")

    @property
    def key(self) -> tuple[str, str]:
        return (self.student_id, self.question_id)

    @property
    def graded(self) -> bool:
        return self.status is GradeStatus.GRADED


@dataclass(frozen=True)
class SurveyResponse:
    student_id: str
    likert: dict[str, int | None]
    q10_choice: Choice | None
    assignment_score: float

    def __post_init__(self) -> None:
        for item, value in self.likert.items():
            if value is not None and not 1 <= value <= 5:
                raise ValidationError(f"{item}={value} outside 1..5")


@dataclass(frozen=True)
class HypothesisConfig:
    alpha: float = 0.05
    mu0: float = 3.0
    p0: float = 0.5

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ValidationError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0 < self.p0 < 1:
            raise ValidationError(f"p0 must be in (0, 1), got {self.p0}")


@dataclass(frozen=True)
class StatTestResult:
    method: str
    statistic: float
    p_value: float
    n: int
    alternative: str
    exact: bool
    n2: int | None = None
    detail: dict = field(default_factory=dict)

    def significant(self, alpha: float) -> bool:
        return self.p_value < alpha


def assign_performance_groups(
    responses: Iterable[SurveyResponse], boundary: str = "weak"
) -> tuple[set[str], set[str]]:
    """Split students into (weak, strong) halves by assignment score.

    Students scoring exactly the median go to ``boundary`` ("weak" by default).
    """
    responses = list(responses)
    if not responses:
        raise ValueError("no survey responses to split")
    if boundary not in ("weak", "strong"):
        raise ValueError(f"boundary must be 'weak' or 'strong', not {boundary!r}")
    med = statistics.median(r.assignment_score for r in responses)
    weak, strong = set(), set()
    for r in responses:
        s = r.assignment_score
        if s < med or (s == med and boundary == "weak"):
            weak.add(r.student_id)
        else:
            strong.add(r.student_id)
    if not weak or not strong:
        logger.warning("performance split is degenerate: %d weak, %d strong", len(weak), len(strong))
    return weak, strong
