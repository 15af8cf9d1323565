"""Shared fixtures and the acceptance summary hook."""
from __future__ import annotations

import numpy as np
import pytest

from artifact.lattice_ops import BandedHermitian, LatticeWindow

ACCEPTANCE_LINES: list[str] = []


def random_banded(rng: np.random.Generator, n_sites: int, w: int) -> BandedHermitian:
    """Random Hermitian banded matrix on a unilateral window of ``n_sites`` sites."""
    win = LatticeWindow.unilateral(n_sites - 1)
    dim = win.dim
    ab = np.zeros((w + 1, dim), dtype=complex)
    for d in range(1, w + 1):
        ab[w - d, d:] = rng.standard_normal(dim - d) + 1j * rng.standard_normal(dim - d)
    ab[w] = rng.standard_normal(dim)
    return BandedHermitian(ab, win)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
