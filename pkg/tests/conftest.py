import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sindylom.synth import get_plant, simulate  # noqa: E402


@pytest.fixture(scope="session")
def p3_data():
    plant = get_plant("P3")
    return {
        "sr": simulate(plant, N=1000, seed=1, name="sr"),
        "ll2": simulate(plant, N=1000, seed=2, name="ll2"),
        "held": simulate(plant, N=1000, seed=3, name="held"),
    }


def pytest_terminal_summary(terminalreporter):
    import acreport

    if acreport.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acreport.RESULTS:
            terminalreporter.write_line(line)
