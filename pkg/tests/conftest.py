import pytest

from hiddenprice import hiddenlp as H

# Largest ratio certified on the coarse grid, found by bisection to 1e-4
# (the certificate program itself is the oracle; frozen after the first run).
GAMMA_COARSE = 0.764765625
# Dual mixture bound at gamma = 0.796, b = 1.95 on the coarse grid.
V_COARSE = 2.3415814615872215


@pytest.fixture(scope="session")
def coarse_cert():
    return H.verify_gamma(GAMMA_COARSE, H.COARSE)


# acceptance verdicts, printed after the run
_VERDICTS = {}


def record(n, title, ok, detail):
    _VERDICTS[n] = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} - {detail}"


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
