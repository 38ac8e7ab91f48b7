import pytest

_acceptance_lines = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects acceptance verdicts so they print after the run even with output captured."""
    return request.config.stash.setdefault(_acceptance_lines, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_acceptance_lines, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
