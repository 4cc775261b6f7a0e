from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from gaitlab.fixtures import TABLE1_FILES
from gaitlab.recording import load_recording

DATA = Path(__file__).resolve().parents[1] / "src" / "gaitlab" / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"

# criterion number -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def table1_recordings():
    return {row: load_recording(DATA / f"{stem}.csv") for row, stem in TABLE1_FILES.items()}


@pytest.fixture(scope="session")
def symmetric_recording():
    return load_recording(DATA / "fixture_symmetric.csv")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
