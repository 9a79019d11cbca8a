import logging
import sys

import numpy as np
import pytest

from hoisynth import demo
from hoisynth.synth import synthesize


@pytest.fixture(autouse=True)
def _quiet_synthesis_logs():
    logging.getLogger("hoisynth").setLevel(logging.ERROR)
    yield


@pytest.fixture(scope="session")
def lift_clip():
    return synthesize(demo.lift_motion(), demo.lift_config(), "lift")


@pytest.fixture(scope="session")
def catch_clip():
    return synthesize(demo.catch_throw_motion(), demo.catch_throw_config(), "catch")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_quat(rng, n=None):
    q = rng.normal(size=(4,) if n is None else (n, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
