import hypothesis
import pytest

from pmcts import prompts
from pmcts.scenarios import hexagon_model

hypothesis.settings.register_profile("fast", max_examples=20)
hypothesis.settings.register_profile("thorough", max_examples=500)


@pytest.fixture
def hexagon():
    return hexagon_model()


@pytest.fixture(autouse=True)
def _builtin_templates():
    yield
    prompts.reset_templates()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Call with (passed, detail); records a PASS/FAIL line and asserts."""

    def record(passed: bool, detail: str):
        name = request.node.name
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
