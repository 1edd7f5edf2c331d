"""Shared pytest plumbing: the acceptance-criteria report.

Acceptance tests record one verdict per criterion; the terminal summary
prints them as a block so every run shows the full pass/fail slate even
with output capture enabled.
"""

ACCEPTANCE_RESULTS = {}


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_RESULTS[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
