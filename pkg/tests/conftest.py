import pytest

from wardrop_logit.scenario import example1_game, example2_game, example3_game, series_game

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ex1():
    return example1_game()


@pytest.fixture(scope="session")
def ex2():
    return example2_game()


@pytest.fixture(scope="session")
def ex3():
    return example3_game()


@pytest.fixture(scope="session")
def series():
    return series_game()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
