import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from heisenclone import normalize_spectrum


@pytest.fixture(scope="session")
def qubit():
    """Equal-weight two-level clock on energies {0, 1}."""
    return normalize_spectrum([(0, 0.5), (1, 0.5)])


@pytest.fixture(scope="session")
def three_level():
    """Symmetric three-level spectrum {0, 1, 2} with weights 1/4, 1/2, 1/4."""
    return normalize_spectrum([(0, 0.25), (1, 0.5), (2, 0.25)])


def random_spectrum(rng: np.random.Generator, k: int | None = None, max_abs: int = 4):
    """Random commensurate spectrum with comfortably bounded probabilities."""
    if k is None:
        k = int(rng.integers(2, 5))
    ints = np.sort(rng.choice(np.arange(-max_abs, max_abs + 1), size=k, replace=False))
    probs = rng.dirichlet(np.full(k, 2.0)) + 0.05
    probs /= probs.sum()
    return normalize_spectrum([(int(e), float(p)) for e, p in zip(ints, probs)])


def spectrum_fractions(s):
    """The spectrum's probabilities as exact fractions of its float values."""
    return [Fraction(p) for _, p in s.levels]
