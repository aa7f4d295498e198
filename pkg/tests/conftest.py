import pytest

from thymodyn.scenarios import preset_params
from thymodyn.sd import SdConfig, run_sd

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def presets():
    return {k: preset_params(k) for k in (1, 2, 3)}


@pytest.fixture(scope="session")
def sd_runs(presets):
    return {k: run_sd(SdConfig(), p) for k, p in presets.items()}


@pytest.fixture(scope="session")
def abs_runs(presets):
    """30-replicate ensembles at seed 0, scale 1, dt 1/1024 for each scenario."""
    from thymodyn.agents import AbsConfig, run_abs

    return {k: run_abs(AbsConfig(seed=0, replicates=30), p) for k, p in presets.items()}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
