"""Shared fixtures and the acceptance summary printed at the end of a run."""

import pytest

_CRITERIA: dict[int, tuple[bool, str]] = {}


class CriterionReport:
    """Collects one pass/fail verdict per acceptance criterion."""

    def __call__(self, n: int, ok: bool, detail: str) -> None:
        _CRITERIA[n] = (bool(ok), detail)
        print(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture(scope="session")
def report():
    return CriterionReport()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}")
