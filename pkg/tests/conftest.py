import pytest

ACCEPTANCE_LINES = []


def record(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture
def acceptance_record():
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
