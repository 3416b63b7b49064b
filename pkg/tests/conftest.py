import pytest

_ACCEPTANCE = []


def record_acceptance(label: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
    print(line)
    _ACCEPTANCE.append(line)
    return ok


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: s.split()[1]):
            terminalreporter.write_line(line)
