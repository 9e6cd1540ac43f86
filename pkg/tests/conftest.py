import numpy as np
import pytest

from dirrho.core import RankMatrix


def random_ranks(rng, n, d):
    """Rank matrix with independently permuted columns."""
    return RankMatrix(np.column_stack([rng.permutation(n) + 1 for _ in range(d)]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
