"""Survey hypothesis tests and human-vs-AAG grader agreement."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..model import (
    LIKERT_ITEMS,
    SCALE_MAX,
    Choice,
    GradeRecord,
    HypothesisConfig,
    StatTestResult,
    SurveyResponse,
    assign_performance_groups,
)
from .kernel import (
    AllZeroDifferences,
    ConstantInput,
    binomial_test_one_sided,
    mann_whitney_u,
    pearson_r,
    wilcoxon_signed_rank,
)

ITEMS = LIKERT_ITEMS + ("Q10",)
INSUFFICIENT = "insufficient data"


def _fmt_p(p: float) -> str:
    return "< 0.0001" if p < 1e-4 else f"{p:.4f}"


def _fmt_stat(x: float) -> str:
    return f"{x:g}" if abs(x) >= 1 and float(2 * x).is_integer() else f"{x:.4f}"


def histogram(scores: Iterable[int]) -> list[int]:
    bins = [0] * (SCALE_MAX + 1)
    for s in scores:
        bins[s] += 1
    return bins


# -- survey ------------------------------------------------------------------

@dataclass
class ResultRow:
    item: str
    result: StatTestResult | None
    n: int
    n2: int | None = None
    verdict: str = INSUFFICIENT


@dataclass
class SurveyAnalysis:
    alpha: float
    one_sample: list[ResultRow]
    between_groups: list[ResultRow]
    weak: set[str]
    strong: set[str]
    group_means: dict[str, tuple[float | None, float | None]]
    counts: dict[str, int]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "item", "method", "statistic", "p_value", "n1", "n2", "exact", "verdict"])
        for table, rows in (("one_sample", self.one_sample), ("weak_vs_strong", self.between_groups)):
            for row in rows:
                r = row.result
                w.writerow([
                    table, row.item,
                    r.method if r else "", repr(r.statistic) if r else "", repr(r.p_value) if r else "",
                    row.n, "" if row.n2 is None else row.n2, r.exact if r else "", row.verdict,
                ])
        return buf.getvalue()

    def group_means_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["item", "weak_mean", "strong_mean"])
        for item, (wm, sm) in self.group_means.items():
            w.writerow([item, "" if wm is None else repr(wm), "" if sm is None else repr(sm)])
        return buf.getvalue()

    def render(self) -> str:
        out = [f"One-sample tests (Q1-Q9 Wilcoxon signed-rank vs median, Q10 binomial), alpha = {self.alpha:g}"]
        out.append(f"{'Item':<5} {'Statistic':>10} {'p-value':>10} {'n':>5}  Interpretation")
        for row in self.one_sample:
            stat = _fmt_stat(row.result.statistic) if row.result else "-"
            p = _fmt_p(row.result.p_value) if row.result else "-"
            out.append(f"{row.item:<5} {stat:>10} {p:>10} {row.n:>5}  {row.verdict}")
        out.append("")
        out.append(f"Weak vs strong students (Mann-Whitney U, weak greater), alpha = {self.alpha:g}")
        out.append(f"{'Item':<5} {'U':>10} {'p-value':>10} {'n1':>5} {'n2':>5}  Interpretation")
        for row in self.between_groups:
            stat = _fmt_stat(row.result.statistic) if row.result else "-"
            p = _fmt_p(row.result.p_value) if row.result else "-"
            out.append(f"{row.item:<5} {stat:>10} {p:>10} {row.n:>5} {row.n2 or 0:>5}  {row.verdict}")
        out.append("")
        out.append(f"Group means (weak n = {len(self.weak)}, strong n = {len(self.strong)})")
        out.append(f"{'Item':<5} {'Weak':>8} {'Strong':>8}")
        for item, (wm, sm) in self.group_means.items():
            out.append(f"{item:<5} {_fmt_mean(wm):>8} {_fmt_mean(sm):>8}")
        return "\n".join(out) + "\n"


def _fmt_mean(x: float | None) -> str:
    return "-" if x is None else f"{x:.3f}"


def _item_values(responses: Iterable[SurveyResponse], item: str) -> list[int]:
    if item == "Q10":
        return [1 if r.q10_choice is Choice.AAG else 0 for r in responses if r.q10_choice is not None]
    return [r.likert[item] for r in responses if r.likert.get(item) is not None]


def _verdict(result: StatTestResult, alpha: float, what: str) -> str:
    return f"Significant (greater than {what})" if result.p_value < alpha else "Not significant"


def analyze_survey(responses: Sequence[SurveyResponse], config: HypothesisConfig = HypothesisConfig()) -> SurveyAnalysis:
    responses = list(responses)
    if not responses:
        raise ValueError("no survey responses")
    one_sample = []
    for item in LIKERT_ITEMS:
        values = _item_values(responses, item)
        row = ResultRow(item, None, len(values))
        if values:
            try:
                row.result = wilcoxon_signed_rank(values, config.mu0)
                row.verdict = _verdict(row.result, config.alpha, f"{config.mu0:g}")
            except AllZeroDifferences:
                pass
        one_sample.append(row)
    q10 = _item_values(responses, "Q10")
    row = ResultRow("Q10", None, len(q10))
    if q10:
        row.result = binomial_test_one_sided(sum(q10), len(q10), config.p0)
        row.verdict = _verdict(row.result, config.alpha, f"{config.p0:g}")
    one_sample.append(row)

    weak_ids, strong_ids = assign_performance_groups(responses)
    weak = [r for r in responses if r.student_id in weak_ids]
    strong = [r for r in responses if r.student_id in strong_ids]
    between = []
    means: dict[str, tuple[float | None, float | None]] = {}
    for item in ITEMS:
        g1, g2 = _item_values(weak, item), _item_values(strong, item)
        row = ResultRow(item, None, len(g1), len(g2))
        if g1 and g2:
            row.result = mann_whitney_u(g1, g2)
            row.verdict = "Significant" if row.result.p_value < config.alpha else "Not significant"
        between.append(row)
        means[item] = (sum(g1) / len(g1) if g1 else None, sum(g2) / len(g2) if g2 else None)
    counts = {item: len(_item_values(responses, item)) for item in ITEMS}
    return SurveyAnalysis(config.alpha, one_sample, between, weak_ids, strong_ids, means, counts)


# -- grader agreement --------------------------------------------------------

@dataclass
class PairedScores:
    keys: list[tuple[str, str]]
    human: list[int]
    aag: list[int]
    unmatched_human: list[tuple[str, str]] = field(default_factory=list)
    unmatched_aag: list[tuple[str, str]] = field(default_factory=list)


def pair_scores(human: Iterable[GradeRecord], aag: Iterable[GradeRecord]) -> PairedScores:
    """Join graded records on (student, question), sorted by key."""
    h = {r.key: r.score for r in human if r.graded}
    a = {r.key: r.score for r in aag if r.graded}
    common = sorted(h.keys() & a.keys())
    return PairedScores(
        keys=common,
        human=[h[k] for k in common],
        aag=[a[k] for k in common],
        unmatched_human=sorted(h.keys() - a.keys()),
        unmatched_aag=sorted(a.keys() - h.keys()),
    )


@dataclass
class QuestionAgreement:
    question_id: str
    n: int
    pearson: StatTestResult | None
    human_hist: list[int]
    aag_hist: list[int]
    exact_agreement: int
    large_discrepancies: int
    discrepancies: list[tuple[str, int, int]]  # (student_id, human, aag), sorted by |diff| desc


@dataclass
class AgreementReport:
    questions: list[QuestionAgreement]
    unmatched_human: list[tuple[str, str]]
    unmatched_aag: list[tuple[str, str]]

    def render(self) -> str:
        out = []
        for q in self.questions:
            r = f"{q.pearson.statistic:.4f}" if q.pearson else "undefined (constant scores)"
            out.append(f"Question {q.question_id}: n = {q.n}, Pearson r = {r}")
            out.append(f"  exact agreement: {q.exact_agreement}, |difference| >= 2: {q.large_discrepancies}")
            out.append("  score  human  aag")
            for s in range(SCALE_MAX + 1):
                out.append(f"  {s:>5}  {q.human_hist[s]:>5}  {q.aag_hist[s]:>3}")
            if q.discrepancies:
                out.append("  largest discrepancies (student: human vs aag):")
                for sid, hs, as_ in q.discrepancies[:10]:
                    out.append(f"    {sid}: {hs} vs {as_}")
            out.append("")
        if self.unmatched_human or self.unmatched_aag:
            out.append(f"Unmatched: {len(self.unmatched_human)} human-only, {len(self.unmatched_aag)} AAG-only")
        return "\n".join(out) + "\n"

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["question_id", "score", "human_count", "aag_count"])
        for q in self.questions:
            for s in range(SCALE_MAX + 1):
                w.writerow([q.question_id, s, q.human_hist[s], q.aag_hist[s]])
        return buf.getvalue()


def compare_graders(human: Iterable[GradeRecord], aag: Iterable[GradeRecord]) -> AgreementReport:
    pairs = pair_scores(human, aag)
    if not pairs.keys:
        raise ValueError("human and AAG grades share no (student, question) keys")
    by_q: dict[str, list[tuple[str, int, int]]] = defaultdict(list)
    for (sid, qid), hs, as_ in zip(pairs.keys, pairs.human, pairs.aag):
        by_q[qid].append((sid, hs, as_))
    questions = []
    for qid in sorted(by_q):
        rows = by_q[qid]
        hs = [r[1] for r in rows]
        as_ = [r[2] for r in rows]
        try:
            pear = pearson_r(hs, as_)
        except (ConstantInput, ValueError):
            pear = None
        disc = sorted((r for r in rows if r[1] != r[2]), key=lambda r: (-abs(r[1] - r[2]), r[0]))
        questions.append(QuestionAgreement(
            question_id=qid,
            n=len(rows),
            pearson=pear,
            human_hist=histogram(hs),
            aag_hist=histogram(as_),
            exact_agreement=sum(1 for r in rows if r[1] == r[2]),
            large_discrepancies=sum(1 for r in rows if abs(r[1] - r[2]) >= 2),
            discrepancies=disc,
        ))
    return AgreementReport(questions, pairs.unmatched_human, pairs.unmatched_aag)
