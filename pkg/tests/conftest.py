import pytest

CRITERIA = {
    1: "phase-velocity fit on the bundled resonator table",
    2: "conformal-mapping phase velocities",
    3: "shift-curve behaviour versus chip separation",
    4: "exact versus approximate loaded resonance",
    5: "profilometry oracle and bundled spacer maps",
    6: "four-corner worst-case tilt",
    7: "notch fitting Monte Carlo",
    8: "photon number",
    9: "relative quality factor",
    10: "report determinism",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _outcomes.setdefault(n, []).append((item.name, not failed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if not results:
            continue
        ok = all(passed for _, passed in results)
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {CRITERIA[n]}"
        if not ok:
            line += "  (failing: " + ", ".join(name for name, passed in results if not passed) + ")"
        terminalreporter.write_line(line)
