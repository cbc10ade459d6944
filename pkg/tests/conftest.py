from __future__ import annotations

import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from helpers import CORPUS, corpus_names, load  # noqa: E402


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(params=corpus_names())
def corpus_program(request):
    return request.param, load(request.param)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
