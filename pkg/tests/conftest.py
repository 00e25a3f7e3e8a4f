"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""
from __future__ import annotations

_results: dict[int, dict] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _results.setdefault(number, {"title": title, "outcomes": []})


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        _results[mark.args[0]]["outcomes"].append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        outcomes = entry["outcomes"]
        status = "PASS" if outcomes and all(outcomes) else "FAIL" if outcomes else "NOT RUN"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}")
