import numpy as np
import pytest

from psmfeat.corpus import BinaryTermMatrix, Vocabulary


def matrix_from_dense(X, labels=None):
    X = np.asarray(X)
    n, V = X.shape
    labels = np.zeros(n, dtype=int) if labels is None else labels
    vocab = Vocabulary(tuple(f"t{j:03d}" for j in range(V)), tuple(int(s) for s in X.sum(axis=0)))
    return BinaryTermMatrix(X, labels, vocab, tuple(f"d{i}" for i in range(n)))


@pytest.fixture
def random_matrix():
    def make(n=40, V=8, density=0.3, seed=0):
        rng = np.random.default_rng(seed)
        X = (rng.random((n, V)) < density).astype(int)
        # keep every column non-degenerate
        X[0, :] = 1
        X[1, :] = 0
        y = (rng.random(n) < 0.5).astype(int)
        y[:2] = [0, 1]
        return matrix_from_dense(X, y)

    return make


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
