import pytest
from hypothesis import settings

# Same examples on every run.
settings.register_profile("repeatable", derandomize=True)
settings.load_profile("repeatable")

# Acceptance criteria append (label, passed, detail) here; printed at the end of the run.
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(label: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE_LINES.append((label, bool(passed), detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_LINES:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {label}  {detail}".rstrip())
