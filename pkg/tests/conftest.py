import numpy as np
import pytest
from scipy.stats import unitary_group

from randmux.angles import FixedPointAngle
from randmux.channels import MultiplexorSpec, SequenceSpec


def random_angles(rng, c):
    return tuple(FixedPointAngle(int(x)) for x in rng.integers(0, 2**64, size=c, dtype=np.uint64))


def random_spec(rng, c):
    return MultiplexorSpec(random_angles(rng, c))


def random_sequence_spec(rng, n, c, interleave=True):
    layers = tuple(random_spec(rng, c) for _ in range(n))
    vs = None
    if interleave:
        vs = tuple(unitary_group.rvs(2, random_state=rng) for _ in range(n))
    return SequenceSpec(layers, vs)


def random_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
