"""Shared pytest hooks.

The acceptance gate records one pass/fail line per criterion; printing them
from inside a test would be swallowed by capture, so they are collected here
and emitted in the terminal summary, where output is never captured.
"""

acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance gate")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
