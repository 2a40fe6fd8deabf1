import warnings

import pytest

from gabench.gab import BigMFallbackWarning

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, passed: bool | None, detail: str = "") -> None:
        verdict = "NOTE" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number} [{verdict}] {title}"
        ACCEPTANCE_LINES.append(line + (f" ({detail})" if detail else ""))
        print(ACCEPTANCE_LINES[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _quiet_big_m():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BigMFallbackWarning)
        yield
