import pytest


def pytest_configure(config):
    config._criterion_lines = []


@pytest.fixture
def record_criterion(request):
    def rec(line: str):
        request.config._criterion_lines.append(line)
        print(line)
    return rec


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
