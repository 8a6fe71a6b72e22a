"""Collects acceptance-criterion outcomes and prints one PASS/FAIL line per criterion."""
import pytest

_OUTCOMES: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _OUTCOMES.setdefault(number, {"title": title, "failed": False, "seen": False})
    if report.when == "call" or report.failed:
        entry["seen"] = True
        entry["failed"] |= report.failed
    notes = item.user_properties
    for key, value in notes:
        if key == "detail":
            entry["detail"] = value


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        e = _OUTCOMES[number]
        status = "FAIL" if e["failed"] or not e["seen"] else "PASS"
        line = f"criterion {number:2d} {status}  {e['title']}"
        if e.get("detail"):
            line += f"  [{e['detail']}]"
        terminalreporter.write_line(line)
