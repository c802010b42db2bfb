import numpy as np
import pytest

from lesiondist.grid import DotSet, VoxelGrid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, ndim, max_side, max_dots=3):
    """Random image in [0, 1) with 1..max_dots distinct dots."""
    dims = tuple(int(v) for v in rng.integers(2, max_side + 1, size=ndim))
    image = VoxelGrid(rng.random(dims))
    n = int(rng.integers(1, max_dots + 1))
    flat = rng.choice(int(np.prod(dims)), size=min(n, int(np.prod(dims))), replace=False)
    dots = DotSet([np.unravel_index(int(f), dims) for f in flat], ndim=ndim)
    return image, dots
