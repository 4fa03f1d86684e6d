"""Collects acceptance verdict lines and prints them after the run.

The acceptance tests record one PASS/FAIL line each; emitting them from a
terminal-summary hook keeps them visible under pytest's output capture.
"""

_VERDICTS: list[str] = []


def record_verdict(line: str) -> None:
    _VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in _VERDICTS:
            terminalreporter.line(line)
