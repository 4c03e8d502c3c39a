import os
import re
import sys
from collections import OrderedDict

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE: "OrderedDict[int, dict]" = OrderedDict()
_CRIT = re.compile(r"test_criterion_(\d+)")


def pytest_runtest_logreport(report):
    m = _CRIT.search(report.nodeid)
    if not m or "test_acceptance" not in report.nodeid:
        return
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = int(m.group(1))
    entry = _ACCEPTANCE.setdefault(n, {"passed": True, "failed": [], "notes": []})
    if report.outcome != "passed":
        entry["passed"] = False
        entry["failed"].append(report.nodeid.split("::")[-1])
    for name, text in report.user_properties:
        if name == "acceptance":
            entry["notes"].append(text)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[n]
        status = "PASS" if e["passed"] else "FAIL"
        line = f"ACCEPTANCE {n:2d}: {status}"
        if e["failed"]:
            line += "  failing: " + ", ".join(e["failed"])
        tr.write_line(line)
        for note in e["notes"]:
            tr.write_line(f"    {note}")


@pytest.fixture
def note(record_property):
    """Attach a line to this criterion's acceptance report."""
    return lambda text: record_property("acceptance", text)
