import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None:
        return
    n = crit.args[0]
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    prev = _ACCEPTANCE.get(n, ("PASS", doc))
    if rep.failed or (rep.when == "call" and rep.skipped):
        _ACCEPTANCE[n] = ("FAIL" if rep.failed else "SKIP", doc)
    elif n not in _ACCEPTANCE:
        _ACCEPTANCE[n] = prev


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        status, doc = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {doc}")
