import pytest

from mlski.cardinal1d import ShapeConfig, generate_table


@pytest.fixture(scope="session")
def table():
    """Default table: c = 1, levels 1..7, 80-digit generation."""
    return generate_table(ShapeConfig(1.0, 7, 80), workers=4)


@pytest.fixture(scope="session")
def small_table():
    return generate_table(ShapeConfig(1.0, 4, 40))


# One PASS/FAIL line per acceptance criterion, printed in the terminal summary.
_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "passed": 0, "failed": []})
    if report.passed and report.when == "call":
        entry["passed"] += 1
    elif report.failed:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    from test_acceptance import DETAILS

    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "FAIL" if entry["failed"] else "PASS"
        total = entry["passed"] + len(entry["failed"])
        tr.write_line(f"criterion {number}: {status} ({entry['passed']}/{total} checks) {entry['title']}")
        for name in entry["failed"]:
            tr.write_line(f"    failed: {name}")
        for line in DETAILS.get(number, []):
            tr.write_line(f"    {line}")
