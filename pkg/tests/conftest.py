import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" or "test_acceptance.py::test_ac" not in rep.nodeid:
                continue
            props = dict(rep.user_properties)
            name = rep.nodeid.split("::")[-1]
            rows.append((name, outcome, props.get("summary", "")))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, summary in sorted(rows):
        ac = name.split("_")[1].upper()
        terminalreporter.write_line(f"{ac} {'PASS' if outcome == 'passed' else 'FAIL'}  {summary}")
