"""``aag`` command-line entry point.

Exit codes: 0 success, 2 usage, 3 auth/transport failure, 4 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import corpus_io
from .grading import (
    GradingError,
    GradingRunConfig,
    SchemeGenerationFailed,
    grade_corpus,
    refine_scheme,
)
from .llm_client import AuthError, ChatClient, LLMError, ProviderConfig
from .mock_provider import MockProvider
from .model import HypothesisConfig, ValidationError
from .prompts import build_refinement_prompt
from .reporting import write_reports
from .stats import analyze_survey, compare_graders

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TRANSPORT = 3
EXIT_DATA = 4

logger = logging.getLogger("aag")


class UsageError(Exception):
    pass


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _provider_config(args: argparse.Namespace) -> ProviderConfig:
    config = ProviderConfig()
    if getattr(args, "config", None):
        try:
            data = json.loads(_existing(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        known = {f.name for f in fields(ProviderConfig)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        try:
            config = replace(config, **data)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad config value: {exc}") from exc
    overrides = {
        "model_id": getattr(args, "model", None),
        "temperature": getattr(args, "temperature", None),
        "endpoint": getattr(args, "endpoint", None),
        "max_concurrency": getattr(args, "max_concurrency", None),
        "max_retries": getattr(args, "max_retries", None),
    }
    try:
        return replace(config, **{k: v for k, v in overrides.items() if v is not None})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _client(args: argparse.Namespace) -> ChatClient:
    config = _provider_config(args)
    if getattr(args, "mock", False):
        return ChatClient(replace(config, model_id="mock"), MockProvider(), seed=0)
    if not config.credential():
        raise AuthError(f"no credential: set ${config.credential_env} or use --mock")
    return ChatClient(config)


def cmd_refine(args: argparse.Namespace) -> int:
    assignment = corpus_io.parse_assignment(_existing(args.assignment))
    if args.dry_run:
        for q in assignment.questions:
            bundle = build_refinement_prompt(q, assignment.schemes.get(q.id), q.reference_solution, assignment.course)
            print(f"===== {q.id} ({bundle.fingerprint[:12]}) =====")
            for m in bundle.messages:
                print(f"--- {m.role} ---\n{m.content}")
        return EXIT_OK
    client = _client(args)
    schemes = {}
    for q in assignment.questions:
        schemes[q.id] = refine_scheme(q, assignment.schemes.get(q.id), client, args.max_parse_retries, assignment.course)
    corpus_io.write_assignment(replace(assignment, schemes=schemes), args.out)
    print(f"wrote {args.out}; review the refined schemes before grading")
    return EXIT_OK


def cmd_grade(args: argparse.Namespace) -> int:
    assignment = corpus_io.parse_assignment(_existing(args.assignment))
    submissions = corpus_io.parse_submissions(_existing(args.submissions), assignment)
    client = _client(args)
    run = GradingRunConfig(
        refine_schemes=args.refine, max_parse_retries=args.max_parse_retries, resume=args.resume
    )
    report = grade_corpus(submissions, assignment, client, run, args.out)
    print(report.to_json())
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    records, bad = corpus_io.read_grade_records(_existing(args.grades))
    assignment = corpus_io.parse_assignment(_existing(args.assignment))
    if not records:
        logger.warning("no grade records in %s", args.grades)
    client = _client(args) if args.summarize else None
    for path in write_reports(records, assignment, args.out_dir, client, args.summarize):
        print(path)
    return EXIT_DATA if bad and args.strict else EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    human, _ = corpus_io.read_grade_records(_existing(args.human_grades))
    aag, _ = corpus_io.read_grade_records(_existing(args.aag_grades))
    report = compare_graders(human, aag)
    print(report.render(), end="")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "agreement.txt").write_text(report.render(), encoding="utf-8")
        (out / "score_histograms.csv").write_text(report.histogram_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_survey(args: argparse.Namespace) -> int:
    responses = corpus_io.parse_survey(_existing(args.survey))
    if not responses:
        raise ValueError("survey file has no responses")
    analysis = analyze_survey(responses, HypothesisConfig(alpha=args.alpha))
    print(analysis.render(), end="")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "survey_tests.csv").write_text(analysis.to_csv(), encoding="utf-8")
        (out / "survey_group_means.csv").write_text(analysis.group_means_csv(), encoding="utf-8")
        (out / "survey_report.txt").write_text(analysis.render(), encoding="utf-8")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    from .synthetic import stat1011_assignment, synthetic_submissions, synthetic_survey

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_io.write_assignment(stat1011_assignment(), out / "assignment.json")
    corpus_io.write_submissions(synthetic_submissions(args.students, args.seed), out / "submissions.json")
    corpus_io.write_survey(synthetic_survey(args.responses, seed=args.seed), out / "survey.csv")
    for name in ("assignment.json", "submissions.json", "survey.csv"):
        print(out / name)
    return EXIT_OK


def _add_provider_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mock", action="store_true", help="use the deterministic offline provider")
    p.add_argument("--config", help="JSON file with provider settings")
    p.add_argument("--model", help="model id")
    p.add_argument("--temperature", type=float)
    p.add_argument("--endpoint", help="chat-completion URL")
    p.add_argument("--max-retries", type=int)
    p.add_argument("--max-parse-retries", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aag", description="Zero-shot LLM assignment grading and evaluation")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="generate or refine marking schemes")
    p.add_argument("assignment")
    p.add_argument("out")
    p.add_argument("--dry-run", action="store_true", help="print prompts without calling the model")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("grade", help="grade all submissions")
    p.add_argument("assignment")
    p.add_argument("submissions")
    p.add_argument("out", help="grade-record file (JSON Lines)")
    p.add_argument("--max-concurrency", type=int)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--refine", action="store_true", help="refine schemes before grading")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_grade)

    p = sub.add_parser("report", help="student feedback and performance summary")
    p.add_argument("grades")
    p.add_argument("assignment")
    p.add_argument("out_dir")
    p.add_argument("--summarize", action="store_true", help="add LLM-summarized common issues")
    p.add_argument("--strict", action="store_true", help="exit 4 if the grade file has malformed lines")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", help="human vs AAG agreement")
    p.add_argument("human_grades")
    p.add_argument("aag_grades")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("survey", help="survey hypothesis tests")
    p.add_argument("survey")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_survey)

    p = sub.add_parser("synth", help="write a synthetic demo corpus")
    p.add_argument("out_dir")
    p.add_argument("--students", type=int, default=150)
    p.add_argument("--responses", type=int, default=104)
    p.add_argument("--seed", type=int, default=1011)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"aag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LLMError as exc:
        print(f"aag: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (SchemeGenerationFailed, GradingError, corpus_io.CorpusError, ValidationError, ValueError, OSError) as exc:
        print(f"aag: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
