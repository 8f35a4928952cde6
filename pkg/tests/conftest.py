import numpy as np
import pytest

from byzopt import objective, topology


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def path2():
    """Two reliable agents joined by one edge."""
    return topology.make_topology(2, [(0, 1)])


@pytest.fixture
def triangle():
    return topology.make_topology(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def k4():
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    return topology.make_topology(4, edges)


@pytest.fixture
def small_lasso():
    return objective.make_synthetic_lasso(3, 4, 5, seed=77, beta1=0.5, beta2=0.05,
                                          noise_std=0.2, row_scale=0.6)


def random_connected_topology(rng, m, byz_count=0, p=0.6):
    """Rejection-sample a connected random network for property tests."""
    for _ in range(200):
        seed = int(rng.integers(2 ** 31))
        try:
            return topology.gen_erdos_renyi(m, p, byz_count, seed)
        except topology.TopologyError:
            continue
    raise RuntimeError("could not sample a connected topology")
