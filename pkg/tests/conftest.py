import os
import sys

import pytest

from prfclf.index import Document, build_index, read_corpus

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name):
    return os.path.join(FIXTURES, name)


@pytest.fixture
def three_docs_index():
    return build_index(read_corpus(fixture_path("three_docs.jsonl")))


@pytest.fixture
def letters_index():
    """Hand-countable corpus over single-letter-ish terms."""
    docs = [
        Document("a", "apple apple banana"),
        Document("b", "apple cherry"),
        Document("c", "banana banana banana cherry date"),
        Document("d", ""),
    ]
    return build_index(docs)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
