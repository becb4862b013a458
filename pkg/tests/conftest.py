from __future__ import annotations

import json
from pathlib import Path

import pytest

from akms_secrecy import SeriesControl

TIGHT = SeriesControl(max_terms=2000, rel_tol=1e-13, hard_cap=5000)

_ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE[criterion] = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


@pytest.fixture(scope="session")
def frozen() -> dict:
    return json.loads((Path(__file__).parent / "data" / "frozen.json").read_text())


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
