import numpy as np
import pytest

from tdoaloc.geometry import MicArray
from tdoaloc.simroom import default_array


@pytest.fixture(scope="session")
def tetra():
    """The benchmark 4-microphone tetrahedron."""
    return default_array()


@pytest.fixture(scope="session")
def penta():
    """A 5-microphone general-position array (tetrahedron plus one)."""
    return MicArray([[2.0, 2.1, 1.83],
                     [1.8, 2.1, 1.83],
                     [1.9, 2.2, 1.97],
                     [1.9, 2.0, 1.97],
                     [2.05, 1.95, 2.05]])


def random_sources(rng, n, lo=0.0, hi=4.0, keepout=None, margin=0.05):
    """Uniform samples in the room cube, outside small balls around the
    given keepout points."""
    out = []
    while len(out) < n:
        cand = rng.uniform(lo, hi, size=(2 * n, 3))
        if keepout is not None:
            dist = np.linalg.norm(cand[:, None, :] - keepout[None, :, :],
                                  axis=2)
            cand = cand[np.min(dist, axis=1) > margin]
        out.extend(cand)
    return np.asarray(out[:n])
