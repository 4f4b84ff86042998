import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_stable(rng, m, margin=0.2):
    B = rng.standard_normal((m, m))
    shift = np.max(np.linalg.eigvals(B).real) + margin + rng.uniform(0, 1)
    return B - shift * np.eye(m)
