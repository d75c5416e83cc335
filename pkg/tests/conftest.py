from __future__ import annotations

from pathlib import Path

import pytest

from sdatlas.graph import derive_causal_graph, enumerate_loops
from sdatlas.xmile import parse_xmile

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture(scope="session")
def golden_models():
    return {p.stem: parse_xmile(p.read_bytes()) for p in sorted(GOLDEN.glob("*.xmile"))}


@pytest.fixture(scope="session")
def population_model(golden_models):
    return golden_models["population"]


@pytest.fixture(scope="session")
def population_graph(population_model):
    return derive_causal_graph(population_model)


@pytest.fixture(scope="session")
def population_loops(population_graph):
    return enumerate_loops(population_graph)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance checklist after the test run; summary output is
    never captured, so the lines show up in a plain `pytest -v` run."""
    try:
        from tests import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
