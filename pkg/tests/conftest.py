import numpy as np
import pytest

from polhdr.core import PolarityStack


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_stack(rng, shape=(16, 16), bit_depth=8):
    """Four random integer-code images."""
    top = 2**bit_depth
    return PolarityStack.from_arrays(
        [rng.integers(0, top, size=shape).astype(float) for _ in range(4)], bit_depth
    )
