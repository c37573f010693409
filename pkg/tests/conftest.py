"""Shared fixtures and the acceptance-criteria reporting hook."""

from __future__ import annotations

import pytest

from ringfill.calibration import calibrate
from ringfill.extraction import extract_device_context
from ringfill.measurements import paper_measurements
from ringfill.testgen import generate_test_structure, paper_configs

_acceptance_lines: list[str] = []


def record_criterion(number: int, description: str, ok: bool) -> None:
    """Collect one pass/fail line per acceptance criterion and assert it."""
    verdict = "PASS" if ok else "FAIL"
    _acceptance_lines.append(f"ACCEPTANCE {number}: {description}: {verdict}")
    assert ok, f"acceptance criterion {number} failed: {description}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def paper_bundle():
    """Corpus rows, generated fixtures, extracted contexts, calibration."""
    corpus = paper_measurements()
    dbs = {}
    contexts = {}
    for row, cfg in zip(corpus, paper_configs()):
        db = generate_test_structure(cfg)
        dbs[row.key] = (cfg, db)
        contexts[row.key] = extract_device_context(db, db.device_annotations[0])
    result = calibrate(corpus, contexts)
    return {
        "corpus": corpus,
        "dbs": dbs,
        "contexts": contexts,
        "result": result,
    }
