import pytest

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number = marker.args[0] if marker else None

    def record(ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE[number] = line
        print(line)
        return ok

    yield record
    if number is not None and number not in ACCEPTANCE:
        ACCEPTANCE[number] = f"criterion {number:>2}: FAIL  did not complete"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
