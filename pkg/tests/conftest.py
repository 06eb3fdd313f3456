import pytest

CRITERIA = {
    1: "lowpass frequency response",
    2: "lowpass step response",
    3: "state-variable filter structure and response",
    4: "glide program on the 1V/oct oscillator",
    5: "RK4 convergence order",
    6: "block semantics",
    7: "algebraic-loop rejection",
    8: "patch text round-trip",
    9: "deterministic CLI output",
    10: "FPAA capacity estimator",
    11: "WAV conformance",
}

_results: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _results.setdefault(marker.args[0], []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        if n not in _results:
            continue
        status = "PASS" if all(_results[n]) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {status}: {CRITERIA[n]}")
