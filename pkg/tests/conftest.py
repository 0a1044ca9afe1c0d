import numpy as np
import pytest

from cmhop.rng import stream


class ScriptedRNG:
    """Generator stand-in whose first integer draws are fixed in advance."""

    def __init__(self, values, seed=0):
        self.values = list(values)
        self.rng = stream(seed)

    def integers(self, low, high, size=None):
        out = self.rng.integers(low, high, size=size)
        k = min(len(self.values), out.size)
        out[:k] = self.values[:k]
        self.values = self.values[k:]
        return out

    def random(self, size=None):
        return self.rng.random(size)


def perfect_matchings(items):
    """All perfect matchings of a list, as lists of pairs."""
    if not items:
        yield []
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1:]
        for m in perfect_matchings(rest):
            yield [(a, items[i])] + m


def matching_key(partner):
    return tuple(int(x) for x in partner)


@pytest.fixture
def rng():
    return stream(12345)


def ks_stat(x, y):
    """Two-sample KS statistic, correct with ties."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    u = np.union1d(x, y)
    fx = np.searchsorted(x, u, side="right") / x.size
    fy = np.searchsorted(y, u, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))
