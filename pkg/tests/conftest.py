import itertools

import numpy as np
import pytest

from dyncomm.core import Partition, SegmentGraph


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


def random_partition(rng, n_nodes, max_blocks):
    labels = rng.integers(0, max_blocks, size=n_nodes)
    return Partition.densify(labels)


def two_cliques(size=10):
    pairs = list(itertools.combinations(range(size), 2)) + \
        list(itertools.combinations(range(size, 2 * size), 2))
    return SegmentGraph.from_pairs(0, 2 * size, pairs)
