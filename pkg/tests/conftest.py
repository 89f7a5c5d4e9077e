import pytest

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{key:>2}] {status:<4} {detail}")


@pytest.fixture
def record():
    def _record(criterion: int, status, detail: str):
        if not isinstance(status, str):
            status = "PASS" if status else "FAIL"
        ACCEPTANCE[criterion] = (status, detail)

    return _record
