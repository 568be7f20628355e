"""Shared pytest plumbing: collects acceptance-criterion verdicts.

Each test in test_acceptance.py reports its criterion through
:func:`record_criterion` before asserting, so the terminal summary ends
with one PASS/FAIL line per criterion even when a criterion fails.
"""

_CRITERIA = {}


def record_criterion(criterion_id: str, passed: bool, detail: str) -> None:
    _CRITERIA[criterion_id] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c[1:])):
        passed, detail = _CRITERIA[cid]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {cid}: {verdict} - {detail}")
