import pytest

from triefringe import MotifCollection, decode_shape, new_source

DNA_PROBS = (0.15, 0.35, 0.35, 0.15)
DNA_LEFT = "((LELL)EEL)"
DNA_RIGHT = "(LE(ELLE)L)"
CHERRY = "(LL)"
CHAIN_MOTIF = "(((LL)E)L)"


@pytest.fixture(scope="session")
def dna():
    return new_source(DNA_PROBS)


@pytest.fixture(scope="session")
def binary():
    return new_source([0.5, 0.5])


@pytest.fixture(scope="session")
def dna_left():
    return decode_shape(DNA_LEFT, 4)


@pytest.fixture(scope="session")
def dna_right():
    return decode_shape(DNA_RIGHT, 4)


@pytest.fixture(scope="session")
def dna_pair(dna_left, dna_right):
    return MotifCollection.of([dna_left, dna_right], [1.0, 1.0])


@pytest.fixture(scope="session")
def cherry():
    return decode_shape(CHERRY, 2)


@pytest.fixture(scope="session")
def chain_motif():
    return decode_shape(CHAIN_MOTIF, 2)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    def record(label: str, ok: bool, detail: str) -> None:
        line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
