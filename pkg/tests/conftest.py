from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

from aag.llm_client import ChatClient, ProviderConfig
from aag.mock_provider import MockProvider
from aag.synthetic import stat1011_assignment

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
GOLDEN = HERE / "golden"

sys.path.insert(0, str(HERE))

UPDATE_GOLDEN = os.environ.get("AAG_UPDATE_GOLDEN") == "1"


def check_golden(name: str, text: str) -> None:
    path = GOLDEN / name
    if UPDATE_GOLDEN:
        path.write_text(text, encoding="utf-8")
    assert path.exists(), f"missing golden file {name}; rerun with AAG_UPDATE_GOLDEN=1"
    assert path.read_text(encoding="utf-8") == text


def fixed_clock() -> str:
    return "2025-01-01T00:00:00+00:00"


def mock_client(provider: MockProvider | None = None, **config) -> ChatClient:
    cfg = ProviderConfig(model_id="mock", **config)
    return ChatClient(cfg, provider or MockProvider(), sleep=lambda s: None, seed=0)


@pytest.fixture
def assignment():
    return stat1011_assignment()


@pytest.fixture
def client():
    return mock_client()


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, ok: bool | None, detail: str) -> None:
    """Store one verdict line; ``ok=None`` marks a skipped criterion."""
    verdict = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"[{verdict}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
