"""Shared fixtures plus a one-line-per-criterion acceptance summary."""

import pytest

from kex.corpus import load_dataset, split_dataset
from kex.fixture import bundled_fixture_path
from kex.preprocess import PipelineConfig

# nodeid -> (number, description) for tests marked as acceptance criteria
_criteria: dict[str, tuple[int, str]] = {}
# number -> (description, outcome)
_outcomes: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(num, text): acceptance criterion, reported as one summary line",
    )


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _criteria[item.nodeid] = (mark.args[0], mark.args[1])


def pytest_runtest_logreport(report):
    info = _criteria.get(report.nodeid)
    if info is None:
        return
    num, text = info
    if report.skipped:
        _outcomes[num] = (text, "SKIP")
    elif report.when == "call":
        _outcomes[num] = (text, "PASS" if report.passed else "FAIL")
    elif report.failed:  # error during setup/teardown
        _outcomes[num] = (text, "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_outcomes):
        text, outcome = _outcomes[num]
        terminalreporter.write_line(f"criterion {num:02d} {outcome}  {text}")


@pytest.fixture(scope="session")
def config():
    return PipelineConfig.default()


@pytest.fixture(scope="session")
def dataset():
    return load_dataset(bundled_fixture_path())


@pytest.fixture(scope="session")
def dataset_split(dataset):
    return split_dataset(dataset, seed=42)
