from pathlib import Path

import pytest

from foliation_lab.cli.grammar import parse_oneform

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = []


def corpus_form(name):
    return parse_oneform((CORPUS / f"{name}.txt").read_text())


@pytest.fixture
def corpus():
    return corpus_form


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
