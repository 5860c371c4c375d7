import time

import pytest

from mecsim import simulator
from mecsim.traces import SystemParams, bundled_trace

_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def params():
    return SystemParams()


@pytest.fixture(scope="session")
def diurnal(params):
    return bundled_trace("diurnal", params)


@pytest.fixture(scope="session")
def flat(params):
    return bundled_trace("flat", params)


@pytest.fixture(scope="session")
def arces_diurnal(diurnal, params):
    """ARCES over the diurnal trace, forecaster training included in the timing."""
    start = time.perf_counter()
    records = simulator.run(diurnal, "arces", "recurrent", params, seed=0)
    return records, time.perf_counter() - start


@pytest.fixture(scope="session")
def nomgmt_diurnal(diurnal, params):
    return simulator.run(diurnal, "nomgmt", "persistence", params)


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects one status line per acceptance criterion for the final summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, title, ok, detail):
        line = f"criterion {number} [{title}]: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
