"""Shared test plumbing: an end-of-run acceptance report.

Acceptance tests record one line each; the hook prints them after the
summary so the verdicts are visible even when every test passes.
"""

_acceptance_lines: list[str] = []


def record_acceptance(line: str):
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.line(line)
