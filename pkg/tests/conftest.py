import pytest

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    def _record(cid: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE[cid] = (passed, detail)
        print(f"{cid}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[2:])):
        passed, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid}: {'PASS' if passed else 'FAIL'}  {detail}")
