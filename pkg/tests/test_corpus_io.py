import json

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from aag import corpus_io
from aag.corpus_io import CorpusError, SemanticError
from aag.model import Choice, Feedback, GradeRecord, Grader, GradeStatus, SurveyResponse
from aag.synthetic import stat1011_assignment, synthetic_submissions, synthetic_survey
from conftest import FIXTURES


def test_parse_table1_fixture():
    a = corpus_io.parse_assignment(FIXTURES / "stat1011.json")
    assert [q.id for q in a.questions] == ["Q1", "Q2"]
    assert "Statistician at the Census and Statistics Department" in a.questions[0].background
    assert len(a.schemes["Q1"].criteria) == 6
    assert a.schemes["Q1"].max_total == 10
    assert a == stat1011_assignment()


def test_missing_scheme_flagged():
    a = corpus_io.parse_assignment(FIXTURES / "no_scheme.json")
    assert a.needs_refinement() == ["Q2"]
    assert a.schemes == {}


def _write(tmp_path, data, name="a.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data, encoding="utf-8")
    return p


def test_dangling_dependency(tmp_path):
    p = _write(tmp_path, {"assignment_id": "x", "questions": [{"id": "B", "text": "t", "depends_on": ["A"]}]})
    with pytest.raises(SemanticError, match="depends_on 'A'"):
        corpus_io.parse_assignment(p)


def test_duplicate_question(tmp_path):
    p = _write(tmp_path, {"assignment_id": "x", "questions": [{"id": "A", "text": "t"}, {"id": "A", "text": "u"}]})
    with pytest.raises(SemanticError, match="duplicate"):
        corpus_io.parse_assignment(p)


def test_invalid_scheme_rejected(tmp_path):
    scheme = {"criteria": [{"description": "d", "alternatives": [{"marks": 9}]}]}
    p = _write(tmp_path, {"assignment_id": "x", "questions": [{"id": "A", "text": "t", "marking_scheme": scheme}]})
    with pytest.raises(SemanticError, match="9 != 10"):
        corpus_io.parse_assignment(p)


def test_syntax_error_has_line_locus(tmp_path):
    p = _write(tmp_path, '{\n  "assignment_id": "x",\n  "questions": [\n}')
    with pytest.raises(CorpusError) as err:
        corpus_io.parse_assignment(p)
    assert ":4:" in err.value.locus


def test_schema_error_names_field(tmp_path):
    p = _write(tmp_path, {"assignment_id": "x", "questions": [{"id": "A"}]})
    with pytest.raises(CorpusError) as err:
        corpus_io.parse_assignment(p)
    assert "questions/0" in err.value.locus


def test_unknown_fields_ignored(tmp_path):
    p = _write(tmp_path, {"assignment_id": "x", "lms_id": 7, "questions": [{"id": "A", "text": "t", "extra": True}]})
    assert corpus_io.parse_assignment(p).questions[0].id == "A"


def test_assignment_round_trip(tmp_path, assignment):
    corpus_io.write_assignment(assignment, tmp_path / "out.json")
    assert corpus_io.parse_assignment(tmp_path / "out.json") == assignment


def test_submissions_150(tmp_path, assignment):
    corpus_io.write_submissions(synthetic_submissions(150), tmp_path / "s.json")
    subs = corpus_io.parse_submissions(tmp_path / "s.json", assignment)
    assert len(subs) == 150
    assert subs == synthetic_submissions(150)


def test_submissions_empty(tmp_path, caplog):
    assert corpus_io.parse_submissions(_write(tmp_path, [], "s.json")) == []
    assert "no submissions" in caplog.text


def test_submissions_duplicate(tmp_path):
    data = [{"student_id": "s1", "answers": {}}, {"student_id": "s1", "answers": {}}]
    with pytest.raises(SemanticError, match="'s1'"):
        corpus_io.parse_submissions(_write(tmp_path, data, "s.json"))


def test_submissions_unknown_question(tmp_path, assignment):
    data = [{"student_id": "s1", "answers": {"Q7": "x"}}]
    with pytest.raises(SemanticError, match="Q7"):
        corpus_io.parse_submissions(_write(tmp_path, data, "s.json"), assignment)


def test_unanswered_maps_to_empty(tmp_path, assignment):
    data = [{"student_id": "s1", "answers": {"Q1": "cluster", "Q2": None}}]
    sub = corpus_io.parse_submissions(_write(tmp_path, data, "s.json"), assignment)[0]
    assert sub.answers == {"Q1": "cluster", "Q2": ""}


# -- survey ----------------------------------------------------------------

def test_survey_104_with_blank(tmp_path):
    rows = synthetic_survey(104, missing={"Q1": 1})
    corpus_io.write_survey(rows, tmp_path / "s.csv")
    parsed = corpus_io.parse_survey(tmp_path / "s.csv")
    assert len(parsed) == 104
    counts = corpus_io.item_counts(parsed)
    assert counts["Q1"] == 103
    assert counts["Q2"] == 104
    assert parsed == rows


def test_survey_out_of_range(tmp_path):
    p = _write(tmp_path, "student_id,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10,score\nr1,6,,,,,,,,,AAG,50\n", "s.csv")
    with pytest.raises(CorpusError) as err:
        corpus_io.parse_survey(p)
    assert err.value.locus.endswith(":2")
    assert "6" in str(err.value)


def test_survey_bad_q10(tmp_path):
    p = _write(tmp_path, "student_id,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10,score\nr1,,,,,,,,,,maybe,50\n", "s.csv")
    with pytest.raises(CorpusError, match="Q10"):
        corpus_io.parse_survey(p)


def test_survey_blank_row_only_grouping(tmp_path):
    p = _write(tmp_path, "student_id,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10,score\nr1,,,,,,,,,,,42\n", "s.csv")
    (resp,) = corpus_io.parse_survey(p)
    assert all(v is None for v in resp.likert.values())
    assert resp.q10_choice is None and resp.assignment_score == 42


def test_survey_empty_file(tmp_path):
    with pytest.raises(CorpusError):
        corpus_io.parse_survey(_write(tmp_path, "", "s.csv"))


# -- grade records ---------------------------------------------------------

def _records(n_students=150):
    out = []
    for i in range(n_students):
        for q in ("Q1", "Q2"):
            out.append(GradeRecord(
                f"s{i:03d}", q, (i * 7 + len(q)) % 11,
                Feedback((f"error {i}",), "because", ("fix it",)),
                model_id="gpt-4", prompt_fingerprint=f"{i:064x}", timestamp="2025-01-01T00:00:00+00:00",
            ))
    return out


def test_grade_round_trip_300(tmp_path):
    recs = _records()
    corpus_io.write_grade_records(recs, tmp_path / "g.jsonl")
    back, bad = corpus_io.read_grade_records(tmp_path / "g.jsonl")
    assert back == recs and bad == []


def test_grade_empty(tmp_path):
    corpus_io.write_grade_records([], tmp_path / "g.jsonl")
    assert (tmp_path / "g.jsonl").read_bytes() == b""
    assert corpus_io.read_grade_records(tmp_path / "g.jsonl") == ([], [])


def test_truncated_final_line(tmp_path):
    p = tmp_path / "g.jsonl"
    corpus_io.write_grade_records(_records(), p)
    data = p.read_bytes()
    p.write_bytes(data[: len(data) - 40])
    back, bad = corpus_io.read_grade_records(p)
    assert len(back) == 299
    assert len(bad) == 1 and bad[0].line_no == 300


def test_writer_drops_partial_tail_on_append(tmp_path):
    p = tmp_path / "g.jsonl"
    recs = _records(2)
    corpus_io.write_grade_records(recs[:3], p)
    p.write_bytes(p.read_bytes() + b'{"student_id":"s9')
    corpus_io.write_grade_records(recs[3:], p, append=True)
    back, bad = corpus_io.read_grade_records(p)
    assert back == recs and bad == []


def test_line_is_bit_stable():
    rec = _records(1)[0]
    assert corpus_io.record_line(rec) == corpus_io.record_line(rec)
    keys = list(json.loads(corpus_io.record_line(rec)))
    assert keys == ["student_id", "question_id", "status", "score", "feedback", "grader",
                    "model_id", "prompt_fingerprint", "timestamp"]


text = st.text(st.characters(blacklist_categories=("Cs",)), max_size=30)
records = st.builds(
    lambda sid, qid, score, errs, expl, sugg, human, skipped, fp, ts: GradeRecord(
        sid, qid, None if skipped else score, Feedback(tuple(errs), expl, tuple(sugg)),
        Grader.HUMAN if human else Grader.AAG,
        "" if human else "model", "" if human else fp or "f", ts,
        GradeStatus.SKIPPED if skipped else GradeStatus.GRADED,
    ),
    text.filter(bool), text.filter(bool), st.integers(0, 10), st.lists(text, max_size=3), text,
    st.lists(text, max_size=3), st.booleans(), st.booleans(), text, text,
)


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture], max_examples=50)
@given(st.lists(records, max_size=20))
def test_grade_round_trip_property(tmp_path, recs):
    p = tmp_path / "prop.jsonl"
    corpus_io.write_grade_records(recs, p)
    back, bad = corpus_io.read_grade_records(p)
    assert back == recs and bad == []


surveys = st.lists(
    st.builds(
        lambda sid, lik, q10, score: SurveyResponse(sid, lik, q10, score),
        st.from_regex(r"[A-Za-z0-9_]{1,8}", fullmatch=True),
        st.fixed_dictionaries({f"Q{i}": st.one_of(st.none(), st.integers(1, 5)) for i in range(1, 10)}),
        st.sampled_from([None, Choice.TA, Choice.AAG]),
        st.one_of(st.integers(0, 100).map(float), st.floats(0, 100, allow_nan=False)),
    ),
    max_size=15,
    unique_by=lambda r: r.student_id,
)


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture], max_examples=50)
@given(surveys)
def test_survey_round_trip_property(tmp_path, rows):
    p = tmp_path / "prop.csv"
    corpus_io.write_survey(rows, p)
    if rows:
        assert corpus_io.parse_survey(p) == rows


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture], max_examples=150)
@given(st.binary(max_size=300))
def test_parsers_never_crash_on_bytes(tmp_path, blob):
    p = tmp_path / "fuzz"
    p.write_bytes(blob)
    for parse in (corpus_io.parse_assignment, corpus_io.parse_submissions, corpus_io.parse_survey):
        try:
            parse(p)
        except CorpusError:
            pass
    recs, bad = corpus_io.read_grade_records(p)
    assert all(m.line_no >= 1 for m in bad)


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture], max_examples=100)
@given(st.recursive(st.none() | st.booleans() | st.integers() | text,
                    lambda c: st.lists(c, max_size=4) | st.dictionaries(text, c, max_size=4), max_leaves=20))
def test_assignment_parser_structured_fuzz(tmp_path, obj):
    p = tmp_path / "fuzz.json"
    p.write_text(json.dumps(obj), encoding="utf-8")
    try:
        corpus_io.parse_assignment(p)
    except CorpusError:
        pass
