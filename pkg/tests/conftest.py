import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from excursion_sets import PredictionEnsemble  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_ensemble(point, samples, scale_floor=1e-8):
    return PredictionEnsemble.from_samples(np.asarray(point, float), np.asarray(samples, float), scale_floor)


ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Log a one-line pass/fail verdict for an acceptance criterion, then assert it.

    ``ok=None`` logs a descriptive line that is not gated.
    """

    def record(k, ok, detail):
        verdict = "INFO" if ok is None else "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"{verdict} criterion {k}: {detail}")
        assert ok is None or ok, f"criterion {k}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
