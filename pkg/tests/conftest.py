import os
import tempfile

import pytest

# Keep the disk cache away from the user's home directory during tests.
os.environ.setdefault("HECKE_RAISE_CACHE", tempfile.mkdtemp(prefix="hecke-raise-test-"))

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(k, title): acceptance criterion k")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = getattr(report, "_acceptance", None)
    if marker is None:
        return
    k, title = marker
    _ACCEPTANCE[k] = ("PASS" if report.passed else "FAIL", title)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is not None:
        rep._acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        status, title = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {status}  {title}")
