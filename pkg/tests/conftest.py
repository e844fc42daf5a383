import pytest

VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """Record the acceptance line for a criterion; printed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        VERDICTS[number] = (ok, detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        ok, detail = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
