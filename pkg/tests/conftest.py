import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from attractor_lab.config import RunConfig  # noqa: E402
from attractor_lab.equilibria import enumerate_equilibria  # noqa: E402
from attractor_lab.model import ConstantDiffusion, ProblemSpec  # noqa: E402
from attractor_lab.pipeline import lab_for  # noqa: E402
from attractor_lab.spectrum import attach_morse_indices  # noqa: E402


@pytest.fixture(scope="session")
def spec10():
    return ProblemSpec(10.0)


@pytest.fixture(scope="session")
def lab10():
    """Default run at lambda = 10; heavy artefacts are computed once per session."""
    return lab_for(RunConfig())


@pytest.fixture(scope="session")
def eqs10(lab10):
    return lab10.equilibria


@pytest.fixture(scope="session")
def by_label(eqs10):
    return {r.label: r for r in eqs10}


@pytest.fixture(scope="session")
def const_spec10():
    return ProblemSpec(10.0, a=ConstantDiffusion(1.0))


@pytest.fixture(scope="session")
def const_eqs10(const_spec10):
    recs, _ = attach_morse_indices(const_spec10, enumerate_equilibria(const_spec10))
    return recs


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
