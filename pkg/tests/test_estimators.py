from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from conftest import random_ranks
from dirrho.core import Direction, RankMatrix, all_directions, compute_ranks, decomposition_weight
from dirrho.errors import DomainError
from dirrho.estimators import (
    MAX_PROCESS_SAMPLE_SIZE,
    EmpiricalProcessSpec,
    decomposed_terms,
    decomposition_prefactor,
    empirical_process,
    estimate_all_directions,
    estimator_prefactors,
    estimator_via_process_integral,
    limit_prefactors,
    rank_denominator,
    rho_hat_3_closed_form,
    rho_hat_4_prefactor,
    rho_hat_decomposed,
    rho_hat_directional,
    rho_hat_minus_subset,
    rho_hat_star3,
)

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def test_two_point_examples():
    concordant = RankMatrix([[1, 1], [2, 2]])
    discordant = RankMatrix([[1, 2], [2, 1]])
    assert rho_hat_directional(concordant, Direction((1, 1))).rational == 1
    assert rho_hat_directional(discordant, Direction((1, 1))).rational == -1
    assert rank_denominator(2, 2) == Fraction(1, 4)


@pytest.mark.parametrize("n,d", [(2, 2), (7, 3), (50, 4), (300, 6)])
def test_comonotone_sample_is_one(n, d):
    ranks = RankMatrix(np.repeat(np.arange(1, n + 1)[:, None], d, axis=1))
    for alpha in (Direction.positive(d), Direction.negative(d)):
        result = rho_hat_directional(ranks, alpha)
        assert result.rational == 1
        assert result.value == 1.0
        assert (result.n, result.d) == (n, d)


def test_large_products_use_exact_integers():
    # (d + 1) * log2(n + 1) exceeds the int64 headroom here
    ranks = RankMatrix(np.repeat(np.arange(1, 1001)[:, None], 8, axis=1))
    assert rho_hat_directional(ranks, Direction.positive(8)).rational == 1


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        rho_hat_directional(RankMatrix([[1, 2], [2, 1]]), Direction((1, 1, 1)))


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(2, 30), d=st.integers(2, 5))
def test_sum_over_directions_is_exactly_zero(seed, n, d):
    ranks = random_ranks(np.random.default_rng(seed), n, d)
    assert sum(r.rational for r in estimate_all_directions(ranks)) == 0


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(2, 40), d=st.integers(3, 5))
def test_decomposition_identity(seed, n, d):
    ranks = random_ranks(np.random.default_rng(seed), n, d)
    for alpha in all_directions(d):
        direct = rho_hat_directional(ranks, alpha)
        decomposed = rho_hat_decomposed(ranks, alpha)
        assert decomposed.rational == direct.rational
        assert abs(decomposed.value - direct.value) <= 1e-10


@pytest.mark.parametrize("d", [3, 4, 5])
def test_decomposition_identity_on_many_rank_matrices(d):
    rng = np.random.default_rng(1000 + d)
    directions = all_directions(d)
    for _ in range(1000):
        ranks = random_ranks(rng, int(rng.integers(2, 41)), d)
        for alpha in directions:
            direct = rho_hat_directional(ranks, alpha)
            assert abs(rho_hat_decomposed(ranks, alpha).value - direct.value) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(2, 30), d=st.integers(2, 5))
def test_reflection_equivariance(seed, n, d):
    ranks = random_ranks(np.random.default_rng(seed), n, d)
    reflected = ranks.reflected()
    for alpha in all_directions(d):
        assert rho_hat_directional(ranks, alpha).rational == rho_hat_directional(reflected, -alpha).rational


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(3, 40))
def test_permutation_and_monotone_invariance(seed, n):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(n, 3))
    base = [r.rational for r in estimate_all_directions(compute_ranks(data))]
    shuffled = data[rng.permutation(n)]
    assert [r.rational for r in estimate_all_directions(compute_ranks(shuffled))] == base
    transformed = np.column_stack([np.exp(data[:, 0]), data[:, 1] ** 3, 2.0 * data[:, 2] + 5.0])
    assert [r.rational for r in estimate_all_directions(compute_ranks(transformed))] == base


def test_bivariate_estimator_is_spearman(rng):
    data = rng.normal(size=(200, 2))
    data[:, 1] += 0.5 * data[:, 0]
    expected = spearmanr(data[:, 0], data[:, 1]).correlation
    assert rho_hat_directional(compute_ranks(data), Direction((1, 1))).value == pytest.approx(expected, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(2, 60))
def test_trivariate_closed_form(seed, n):
    ranks = random_ranks(np.random.default_rng(seed), n, 3)
    for alpha in all_directions(3):
        assert rho_hat_3_closed_form(ranks, alpha) == rho_hat_directional(ranks, alpha).rational


def test_four_dimensional_prefactor():
    for n in range(5, 101):
        assert rho_hat_4_prefactor(n) == decomposition_prefactor(n, 4)


def test_minus_subset_relation_to_directional():
    n, d = 25, 3
    ranks = RankMatrix(np.repeat(np.arange(1, n + 1)[:, None], d, axis=1))
    alpha = Direction.negative(d)
    terms = decomposed_terms(ranks, alpha)
    assert list(terms) == [(0, 1, 2)]
    rescaled = decomposition_prefactor(n, d) * decomposition_weight(d) * terms[(0, 1, 2)]
    assert rescaled == rho_hat_directional(ranks, alpha).rational
    assert rho_hat_minus_subset(ranks, (0, 1, 2)) == pytest.approx(float(terms[(0, 1, 2)]))
    assert rho_hat_minus_subset(ranks.pseudo_observations(), (0, 1, 2)) == pytest.approx(float(terms[(0, 1, 2)]))


def test_minus_subset_anti_monotone_pair():
    ranks = RankMatrix([[1, 2], [2, 1]])
    # c_2 * (2/9 - 1/4)
    assert rho_hat_minus_subset(ranks, (0, 1)) == pytest.approx(-1 / 3)
    with pytest.raises(DomainError):
        rho_hat_minus_subset(ranks, (0,))
    with pytest.raises(DomainError):
        rho_hat_minus_subset(ranks, (0, 2))


def test_minus_subset_independent_columns(rng):
    n = 10_000
    ranks = random_ranks(rng, n, 3)
    for subset in [(0, 1), (1, 2), (0, 1, 2)]:
        assert abs(rho_hat_minus_subset(ranks, subset)) <= 4 / np.sqrt(n)


def test_star_estimator():
    n = 30
    line = np.arange(1, n + 1)
    assert rho_hat_star3(RankMatrix(np.column_stack([line, line, line]))) == pytest.approx(1.0)
    reversed_last = RankMatrix(np.column_stack([line, line, n + 1 - line]))
    assert rho_hat_star3(reversed_last) == pytest.approx(-1 / 3)
    with pytest.raises(DomainError):
        rho_hat_star3(RankMatrix(np.column_stack([line, line])))


def test_empirical_process_values():
    n = 9
    ranks = random_ranks(np.random.default_rng(4), n, 3)
    spec = EmpiricalProcessSpec.for_direction(Direction.positive(3))
    assert empirical_process(ranks, spec, [1.0, 1.0, 1.0]) == pytest.approx(n / (n + 1))
    assert empirical_process(ranks, spec, [0.0, 0.0, 0.0]) == 0.0
    with pytest.raises(DomainError):
        empirical_process(ranks, spec, [0.5, 1.5, 0.5])
    with pytest.raises(DomainError):
        empirical_process(ranks, spec, [0.5, 0.5])


def test_empirical_process_one_dimensional_steps():
    n = 5
    ranks = RankMatrix(np.column_stack([np.arange(1, n + 1), np.arange(n, 0, -1)]))
    spec = EmpiricalProcessSpec((0,), (1,))
    grid = np.array([[k / (n + 1)] for k in range(n + 1)])
    values = empirical_process(ranks, spec, grid)
    np.testing.assert_allclose(values, np.arange(n + 1) / (n + 1))
    lower = EmpiricalProcessSpec((1,), (-1,))
    assert empirical_process(ranks, lower, [0.0]) == pytest.approx(n / (n + 1))


def test_empirical_process_spec_validation():
    with pytest.raises(DomainError):
        EmpiricalProcessSpec((), ())
    with pytest.raises(DomainError):
        EmpiricalProcessSpec((0, 0), (1, 1))
    with pytest.raises(DomainError):
        EmpiricalProcessSpec((0, 1), (1, 0))
    with pytest.raises(DomainError):
        empirical_process(RankMatrix([[1, 2], [2, 1]]), EmpiricalProcessSpec((0, 2), (1, 1)), [0.5, 0.5])


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(2, 50), d=st.integers(2, 3))
def test_process_integral_matches_direct(seed, n, d):
    ranks = random_ranks(np.random.default_rng(seed), n, d)
    for alpha in all_directions(d):
        via_process = estimator_via_process_integral(ranks, alpha)
        assert via_process == pytest.approx(rho_hat_directional(ranks, alpha).value, abs=1e-6)


def test_process_integral_examples():
    assert estimator_via_process_integral(RankMatrix([[1, 1], [2, 2]]), Direction((1, 1))) == pytest.approx(1.0, abs=1e-6)
    line = np.arange(1, 21)
    comonotone = RankMatrix(np.column_stack([line] * 4))
    assert estimator_via_process_integral(comonotone, Direction.negative(4)) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        estimator_via_process_integral(RankMatrix(np.column_stack([line] * 5)), Direction.positive(5))


def test_process_integral_sample_size_guard():
    line = np.arange(1, MAX_PROCESS_SAMPLE_SIZE + 1)
    at_limit = RankMatrix(np.column_stack([line, line[::-1]]))
    assert estimator_via_process_integral(at_limit, Direction((1, 1))) == pytest.approx(-1.0, abs=1e-6)
    longer = np.arange(1, MAX_PROCESS_SAMPLE_SIZE + 2)
    with pytest.raises(DomainError):
        estimator_via_process_integral(RankMatrix(np.column_stack([longer, longer])), Direction((1, 1)))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_prefactors_converge(d):
    a0, b0 = limit_prefactors(d)
    errors = []
    for n in (100, 1000, 10000):
        a_n, b_n = estimator_prefactors(n, d)
        errors.append((abs(float(a_n - a0)), abs(float(b_n - b0))))
        assert n * errors[-1][0] <= 10 * float(a0)
        assert n * errors[-1][1] <= 10 * float(b0)
    assert errors[2][0] < errors[1][0] < errors[0][0]
    assert limit_prefactors(3) == (8, 1)
