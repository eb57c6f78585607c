"""Shared pytest plumbing: the acceptance scorecard summary block.

Acceptance tests register one line per criterion; the lines are printed
after the run, outside pytest's output capture, so a plain ``pytest -v``
always ends with the full scorecard.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance scorecard")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
