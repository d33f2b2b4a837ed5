"""Shared test plumbing: the acceptance-criteria summary section."""

_CRITERION_LINES = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Collect one pass/fail line per acceptance criterion for the summary."""
    verdict = "PASS" if passed else "FAIL"
    line = f"criterion {number:2d}: {verdict} - {detail}"
    # replace an earlier line for the same criterion (reruns)
    _CRITERION_LINES[:] = [l for l in _CRITERION_LINES
                           if not l.startswith(f"criterion {number:2d}:")]
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERION_LINES):
            terminalreporter.write_line(line)
