"""Deterministic synthetic corpora for demos, tests and the acceptance suite.

The two questions and their marking schemes follow the STAT1011 sampling
and stratification questions. The stratification scheme in the source is
guidance without marks; the marks given to it here are our own.
"""

from __future__ import annotations

import random

from .model import (
    LIKERT_ITEMS,
    Alternative,
    Assignment,
    Choice,
    Criterion,
    MarkingScheme,
    Question,
    Submission,
    SurveyResponse,
)

SAMPLING_Q = Question(
    id="Q1",
    background=(
        "You are a Statistician at the Census and Statistics Department, tasked with leading a team "
        "to collect data on the aging population in a housing estate in Shatin. The collected data "
        "will be reported to the Social Welfare Department."
    ),
    text="What kind of sampling method will you suggest using?",
)

STRATA_Q = Question(
    id="Q2",
    background="You would like to conduct a survey to predict the results of the US presidential election.",
    text="Find a good variable for forming strata. Explain your choice briefly.",
)


def _single(description: str, marks: int) -> Criterion:
    return Criterion(description, (Alternative(marks, description),))


SAMPLING_SCHEME = MarkingScheme(
    question_id="Q1",
    criteria=(
        Criterion(
            "Sampling method",
            (
                Alternative(3, "Award 3 marks if the student selects cluster sampling as the sampling method."),
                Alternative(2, "Award 2 marks if the student proposes any other appropriate sampling method."),
            ),
        ),
        _single(
            "Award 1 mark if the student addresses practical issues of the proposed sampling scheme "
            "(e.g., ease of implementation, availability of clustering/stratifying variables).",
            1,
        ),
        _single("Award 2 marks if the student considers the cost-effectiveness of the proposed sampling scheme.", 2),
        _single("Award 1 mark for a strong, well-reasoned explanation of why the proposed method is cost-effective.", 1),
        _single("Award 2 marks if the student considers the representativeness of the proposed sampling scheme.", 2),
        _single("Award 1 mark for a strong, clear justification of how the proposed method ensures representativeness.", 1),
    ),
)

STRATA_SCHEME = MarkingScheme(
    question_id="Q2",
    criteria=(
        _single("This is an open-ended question, and the answer can be subjective.", 0),
        _single(
            "The student can choose any good variables they want. Some examples include by states "
            "and/or age group, etc.",
            3,
        ),
        _single(
            "The student needs to explain that there is large between-strata variation and that a "
            "representative sample is obtained based on the chosen variable.",
            4,
        ),
        _single("Additionally, the student must explain that such a stratifying variable is feasible in practice.", 3),
    ),
)


def stat1011_assignment(with_schemes: bool = True) -> Assignment:
    schemes = {"Q1": SAMPLING_SCHEME, "Q2": STRATA_SCHEME} if with_schemes else {}
    return Assignment(
        id="stat1011-a1",
        course="STAT1011 Introduction to Statistics",
        questions=(SAMPLING_Q, STRATA_Q),
        schemes=schemes,
    )


_Q1_PARTS = [
    ["I suggest cluster sampling, using each building in the estate as a cluster.",
     "Stratified sampling by floor would work well here.",
     "Simple random sampling of all households.",
     "Systematic sampling of every 10th flat.",
     ""],
    ["It is easy to implement because the building list is available.",
     "We only need the list of buildings, not every resident.",
     ""],
    ["It is cheap since interviewers visit fewer locations.",
     "Travel costs are reduced.",
     ""],
    ["Buildings are similar to each other, so each cluster is representative of the estate.",
     "Every household has a known chance of selection, which keeps the sample representative.",
     ""],
]

_Q2_PARTS = [
    ["I would stratify by state.", "Age group is a good stratifying variable.",
     "Stratify by income level.", "Use party registration as strata.", ""],
    ["Voting preferences differ a lot between states, so between-strata variation is large.",
     "Different age groups vote differently.", ""],
    ["State of residence is known for every voter, so it is feasible in practice.",
     "Age is easy to collect.", ""],
]


def _compose(rng: random.Random, parts: list[list[str]]) -> str:
    return " ".join(s for s in (rng.choice(p) for p in parts) if s)


def synthetic_submissions(n: int = 150, seed: int = 1011) -> list[Submission]:
    rng = random.Random(seed)
    return [
        Submission(f"s{i:03d}", {"Q1": _compose(rng, _Q1_PARTS), "Q2": _compose(rng, _Q2_PARTS)})
        for i in range(1, n + 1)
    ]


def synthetic_survey(
    n: int = 104,
    aag_choices: int = 93,
    missing: dict[str, int] | None = None,
    seed: int = 2024,
) -> list[SurveyResponse]:
    """Positively skewed Likert answers; ``missing`` blanks that many cells per item."""
    if missing is None:
        missing = {"Q1": 1, "Q2": 1, "Q5": 1, "Q7": 1, "Q8": 1, "Q9": 1}
    rng = random.Random(seed)
    choices = [Choice.AAG] * aag_choices + [Choice.TA] * (n - aag_choices)
    rng.shuffle(choices)
    blanks = {item: set(rng.sample(range(n), k)) for item, k in missing.items()}
    out = []
    for i in range(n):
        score = float(rng.randint(8, 20) * 5)
        weakness = (100 - score) / 100
        likert: dict[str, int | None] = {}
        for item in LIKERT_ITEMS:
            if i in blanks.get(item, ()):
                likert[item] = None
                continue
            base = rng.choices([1, 2, 3, 4, 5], weights=[2, 4, 14, 45, 35])[0]
            if weakness > 0.4 and base < 5 and rng.random() < 0.3:
                base += 1
            likert[item] = base
        out.append(SurveyResponse(f"r{i + 1:03d}", likert, choices[i], score))
    return out
