import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from bgcusum.distributions import Gaussian, Laplace, Uniform, gaussian, laplace, mixture, uniform

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def atom_model():
    """0.5 N(0,1) + 0.25 at -1 + 0.25 at +1."""
    return mixture([(1.0, Gaussian(0.0, 1.0))], atoms=[(-1.0, 0.25), (1.0, 0.25)])


def atom_model_shifted():
    return mixture([(1.0, Gaussian(0.0, 1.0))], atoms=[(-1.0, 0.33), (1.0, 0.17)])


# analytic pairs used across n-selection and distinguishability checks
PAIR_MATRIX = {
    "variance": (gaussian(), gaussian(0.0, 0.5)),
    "mean": (gaussian(), gaussian(0.5, 1.0)),
    "laplace": (gaussian(), laplace(0.0, 0.7071)),
    "bimodal": (gaussian(), mixture([(0.6, Gaussian(1.0, 1.0)), (0.4, Gaussian(-1.0, 1.0))])),
    "uniform": (gaussian(), uniform(-1.0, 1.0)),
    "laplace_pre": (laplace(0.0, 1.0), gaussian(0.0, 2.0)),
    "uniform_pre": (uniform(-2.0, 2.0), mixture([(0.5, Uniform(-2.0, 0.0)), (0.5, Uniform(-1.0, 2.0))])),
    "atoms": (atom_model(), atom_model_shifted()),
    "laplace_shift": (laplace(0.0, 1.0), mixture([(1.0, Laplace(0.3, 1.0))])),
}


# one verdict line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
