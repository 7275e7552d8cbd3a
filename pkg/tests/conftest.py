import pytest

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(cid, passed, detail):
        ACCEPTANCE[cid] = (bool(passed), detail)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c.split("-")[0])):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"AC{cid}: {'PASS' if ok else 'FAIL'}  {detail}")
