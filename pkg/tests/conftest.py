import numpy as np
import pytest

from spixbench.core import synthetic_suite


def random_label_map(rng, h, w, max_labels=6, smooth=True):
    """Blocky random labels; ``smooth`` grows patches so boundaries look like regions."""
    if not smooth:
        return rng.integers(0, max_labels, size=(h, w))
    bh, bw = max(1, h // rng.integers(2, 5)), max(1, w // rng.integers(2, 5))
    coarse = rng.integers(0, max_labels, size=(h // bh + 1, w // bw + 1))
    labels = np.kron(coarse, np.ones((bh, bw), dtype=np.int64))[:h, :w]
    flips = rng.random((h, w)) < 0.1
    labels[flips] = rng.integers(0, max_labels, size=int(flips.sum()))
    return labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def suite():
    """Default desk-scale synthetic suite: 10 images of 160x120."""
    return synthetic_suite(10)


@pytest.fixture
def half_split():
    """4x4 ground truth split into two 4x2 halves and a 12/4-pixel superpixel map."""
    gt = np.array([[0, 0, 1, 1]] * 4)
    sp = np.array([[0, 0, 0, 1]] * 4)
    return gt, sp


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
