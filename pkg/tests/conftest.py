"""Shared pytest hooks for the test suite."""

import sys


def pytest_terminal_summary(terminalreporter):
    """Replay acceptance verdict lines after the run.

    The acceptance tests record one verdict per criterion while they
    execute; replaying them here puts the full list in a plain
    ``pytest -v`` log, where per-test capture would otherwise hide the
    passing ones.
    """
    for name, module in sys.modules.items():
        if name.rsplit(".", 1)[-1] != "test_acceptance":
            continue
        lines = getattr(module, "VERDICTS", None)
        if lines:
            terminalreporter.section("acceptance verdicts")
            for line in lines:
                terminalreporter.write_line(line)
