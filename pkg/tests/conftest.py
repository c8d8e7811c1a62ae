import numpy as np
import pytest

from dataring.crypto import collective_key, decode_window, get_group, keygen


@pytest.fixture(scope="session")
def p256():
    return get_group("p256")


@pytest.fixture(scope="session")
def sim():
    return get_group("sim")


def make_keys(group, seed=0):
    rng = np.random.default_rng(seed)
    s1, s2, q = (keygen(group, rng) for _ in range(3))
    return s1, s2, q, collective_key([s1, s2])


@pytest.fixture(scope="session")
def p256_keys(p256):
    return make_keys(p256)


@pytest.fixture(scope="session")
def sim_keys(sim):
    return make_keys(sim)


@pytest.fixture(scope="session")
def p256_window(p256):
    return decode_window(p256, 2000)
