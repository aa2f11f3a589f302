"""Shared pytest plumbing.

test_acceptance appends one verdict line per end-to-end check; printing
them from a terminal-summary hook keeps them visible even though pytest
captures stdout of passing tests.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance results")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
