from fractions import Fraction

import numpy as np
import pytest

from dirrho.core import (
    CoefficientEstimate,
    DataMatrix,
    Direction,
    Method,
    RankMatrix,
    TiePolicy,
    all_directions,
    compute_ranks,
    decomposition_weight,
    directional_ranks,
    normalization_constant,
    partition_from_direction,
)
from dirrho.errors import DataValidationError, DomainError


@pytest.mark.parametrize("text", ["(-1,1,1,-1)", "-1,1,1,-1", "-++-", " ( -1, 1, +1, -1 ) "])
def test_direction_parse_forms(text):
    alpha = Direction.parse(text)
    assert alpha.signs == (-1, 1, 1, -1)
    assert str(alpha) == "(-1,1,1,-1)"
    assert alpha.compact() == "-++-"


@pytest.mark.parametrize("text", ["(1)", "(1,0,1)", "abc", "+", "(2,1)"])
def test_direction_parse_rejects(text):
    with pytest.raises(DomainError):
        Direction.parse(text)


def test_direction_basics():
    alpha = Direction((-1, 1, 1))
    assert alpha.d == 3
    assert alpha.negative_count == 1
    assert (-alpha).signs == (1, -1, -1)
    assert Direction.positive(3) == Direction((1, 1, 1))
    assert Direction.negative(2).signs == (-1, -1)
    assert alpha.restrict((0, 2)) == (-1, 1)
    with pytest.raises(DomainError):
        Direction((1,))


def test_normalization_constants():
    assert normalization_constant(2) == 12
    assert normalization_constant(3) == 8
    assert normalization_constant(4) == Fraction(80, 11)
    with pytest.raises(DomainError):
        normalization_constant(1)


def test_decomposition_weights():
    assert decomposition_weight(0) == 0
    assert decomposition_weight(1) == 0
    assert decomposition_weight(2) == Fraction(1, 12)
    assert decomposition_weight(3) == Fraction(1, 8)
    for k in range(2, 8):
        assert decomposition_weight(k) == 1 / normalization_constant(k)


def test_partition_and_subsets():
    part = partition_from_direction(Direction((-1, 1, 1, -1)))
    assert part.negatives == (0, 3)
    assert part.positives == (1, 2)
    subsets = list(part.subsets_of_positives())
    assert subsets == [(), (1,), (2,), (1, 2)]
    assert part.union_with((2,)) == (0, 2, 3)


def test_all_directions():
    directions = all_directions(3)
    assert len(directions) == 8
    assert len(set(directions)) == 8
    assert directions[0] == Direction.positive(3)
    assert directions[-1] == Direction.negative(3)
    with pytest.raises(DomainError):
        all_directions(5, limit=4)
    with pytest.raises(DomainError):
        all_directions(1)


def test_data_matrix_validation():
    with pytest.raises(DataValidationError) as info:
        DataMatrix([[1.0, 2.0], [np.nan, 3.0], [4.0, 5.0]])
    assert info.value.row == 2
    assert info.value.column == 0
    with pytest.raises(DataValidationError):
        DataMatrix([[1.0, 2.0]])
    with pytest.raises(DataValidationError):
        DataMatrix([[1.0], [2.0]])
    data = DataMatrix([[1.0, 2.0], [3.0, 4.0]])
    assert (data.n, data.d) == (2, 2)
    with pytest.raises(ValueError):
        data.values[0, 0] = 9.0


def test_rank_matrix_validation():
    with pytest.raises(DataValidationError):
        RankMatrix([[1, 1], [1, 2]])
    ranks = RankMatrix([[1, 2], [2, 1]])
    assert ranks.tie_counts == (0, 0)
    assert np.array_equal(ranks.reflected().ranks, [[2, 1], [1, 2]])
    assert np.allclose(ranks.pseudo_observations().u, [[1 / 3, 2 / 3], [2 / 3, 1 / 3]])


def test_compute_ranks_stable_ties():
    ranks = compute_ranks([[1.0, 5.0], [1.0, 3.0], [2.0, 4.0]])
    assert np.array_equal(ranks.ranks[:, 0], [1, 2, 3])
    assert np.array_equal(ranks.ranks[:, 1], [3, 1, 2])
    assert ranks.tie_counts == (1, 0)
    assert ranks.tie_count == 1


def test_compute_ranks_random_ties():
    data = [[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [0.0, 3.0]]
    with pytest.raises(DomainError):
        compute_ranks(data, TiePolicy.RANDOM)
    first = compute_ranks(data, "random", rng=7)
    second = compute_ranks(data, "random", rng=7)
    assert np.array_equal(first.ranks, second.ranks)
    assert first.ranks[3, 0] == 1
    assert sorted(first.ranks[:3, 0]) == [2, 3, 4]
    assert first.tie_counts == (2, 0)


def test_compute_ranks_matches_argsort(rng):
    data = rng.normal(size=(40, 3))
    ranks = compute_ranks(data)
    for j in range(3):
        expected = np.empty(40, dtype=int)
        expected[np.argsort(data[:, j])] = np.arange(1, 41)
        assert np.array_equal(ranks.ranks[:, j], expected)


def test_directional_ranks():
    ranks = RankMatrix([[1, 2], [2, 1]])
    oriented = directional_ranks(ranks, Direction((-1, 1)))
    assert np.array_equal(oriented, [[2, 2], [1, 1]])
    with pytest.raises(DomainError):
        directional_ranks(ranks, Direction((1, 1, 1)))


def test_coefficient_estimate_provenance():
    CoefficientEstimate(0.1, Method.MONTE_CARLO, std_error=0.01, sample_count=10)
    CoefficientEstimate(0.1, Method.RANK_ESTIMATOR, std_error=0.05)
    with pytest.raises(DomainError):
        CoefficientEstimate(0.1, Method.MONTE_CARLO)
    with pytest.raises(DomainError):
        CoefficientEstimate(0.1, Method.CLOSED_FORM, std_error=0.01)
    with pytest.raises(DomainError):
        CoefficientEstimate(0.1, Method.MONTE_CARLO, std_error=-1.0)
