"""
Rank-based estimators of directional rho-coefficients.

Directional ranks follow ``core.directional_ranks``: R where alpha_i = +1 and
n + 1 - R where alpha_i = -1. Sums of rank products are carried in exact
integer arithmetic so that identities between the estimators hold exactly.
"""

import functools
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from dirrho.core import (
    CoefficientEstimate,
    Direction,
    Method,
    PseudoObservations,
    RankMatrix,
    all_directions,
    decomposition_weight,
    directional_ranks,
    normalization_constant,
    partition_from_direction,
)
from dirrho.errors import DomainError

logger = logging.getLogger(__name__)

# headroom below 2^63 for int64 products and their row sums
_INT64_BITS = 62

# the process integral holds an n x d x (n + 1) indicator array
MAX_PROCESS_SAMPLE_SIZE = 2000


@dataclass(frozen=True)
class EstimatorResult:
    """
    Estimate of one directional coefficient from an n x d rank matrix.

    ``rational`` holds the exact value the float was rounded from.
    """

    alpha: Direction
    value: float
    n: int
    d: int
    tie_count: int = 0
    rational: Optional[Fraction] = field(default=None, compare=False)

    def as_estimate(self):
        return CoefficientEstimate(self.value, Method.RANK_ESTIMATOR, sample_count=self.n)


@dataclass(frozen=True)
class EmpiricalProcessSpec:
    """
    Coordinates ``beta`` and signs of an empirical copula process.

    A sign of +1 counts ranks at or below u_i, a sign of -1 counts ranks at or above it.
    """

    beta: Tuple[int, ...]
    signs: Tuple[int, ...]

    def __post_init__(self):
        beta = tuple(int(i) for i in self.beta)
        signs = tuple(int(s) for s in self.signs)
        if not beta:
            raise DomainError("an empirical process needs at least one coordinate")
        if len(set(beta)) != len(beta) or min(beta) < 0:
            raise DomainError(f"process coordinates must be distinct nonnegative indices, got {beta}")
        if len(signs) != len(beta) or any(s not in (1, -1) for s in signs):
            raise DomainError(f"need one +1/-1 sign per coordinate, got {signs} for {beta}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "signs", signs)

    @classmethod
    def for_direction(cls, alpha):
        """Process over every coordinate, signed like ``alpha``."""
        return cls(tuple(range(alpha.d)), alpha.signs)


def _as_ranks(obj):
    if isinstance(obj, RankMatrix):
        return obj
    if isinstance(obj, PseudoObservations):
        return RankMatrix(np.rint(obj.u * (obj.n + 1)).astype(np.int64))
    raise DomainError(f"expected ranks or pseudo-observations, got {type(obj).__name__}")


def _product_sum(matrix):
    """Exact sum over rows of the product of the row entries."""
    n, d = matrix.shape
    if (d + 1) * math.log2(n + 1) < _INT64_BITS:
        return int(np.prod(matrix, axis=1, dtype=np.int64).sum(dtype=np.int64))
    return int(np.prod(matrix.astype(object), axis=1).sum())


@functools.lru_cache(maxsize=256)
def _power_sum(n, d):
    return sum(j ** d for j in range(1, n + 1))


def rank_denominator(n, d):
    """D = (1/n) sum_j j^d - ((n+1)/2)^d, positive for n >= 2."""
    if n < 2:
        raise DomainError(f"estimators need n >= 2, got {n}")
    return Fraction(_power_sum(n, d), n) - Fraction(n + 1, 2) ** d


def _exact_directional(ranks, alpha):
    oriented = directional_ranks(ranks, alpha)
    n, d = ranks.n, ranks.d
    return (Fraction(_product_sum(oriented), n) - Fraction(n + 1, 2) ** d) / rank_denominator(n, d)


def rho_hat_directional(ranks, alpha):
    """
    Rank estimator of the directional coefficient.

    rho_hat = [(1/n) sum_j prod_i R_ij^alpha - ((n+1)/2)^d] / [(1/n) sum_j j^d - ((n+1)/2)^d]

    Args:
        ranks (RankMatrix): n x d ranks, n >= 2
        alpha (Direction): Direction with ``alpha.d == ranks.d``

    Returns:
        EstimatorResult: Equal to 1 when all directional-rank columns coincide
    """
    value = _exact_directional(ranks, alpha)
    return EstimatorResult(alpha, float(value), ranks.n, ranks.d, ranks.tie_count, value)


def _exact_minus_subset(ranks, subset):
    k = len(subset)
    lower = ranks.n + 1 - ranks.ranks[:, list(subset)]
    mean = Fraction(_product_sum(lower), ranks.n * (ranks.n + 1) ** k)
    return normalization_constant(k) * (mean - Fraction(1, 2 ** k))


def rho_hat_minus_subset(pseudo, subset):
    """
    Lower-orthant estimator on the margin K: c_|K| ((1/n) sum_j prod_{i in K} (1 - U_ij) - 2^-|K|).

    Args:
        pseudo (PseudoObservations or RankMatrix): Pseudo-observations U = R / (n + 1)
        subset (tuple): Column indices K, |K| >= 2

    Returns:
        float: The estimate
    """
    subset = tuple(subset)
    if len(subset) < 2:
        raise DomainError(f"lower-orthant estimator needs |K| >= 2, got {subset}")
    ranks = _as_ranks(pseudo)
    if max(subset) >= ranks.d:
        raise DomainError(f"subset {subset} out of range for {ranks.d} columns")
    return float(_exact_minus_subset(ranks, subset))


def decomposition_prefactor(n, d):
    """(n+1)^d / D, the factor in front of the margin combination."""
    return Fraction((n + 1) ** d) / rank_denominator(n, d)


def decomposed_terms(ranks, alpha):
    """
    Margin estimators rho_hat^-_{I ∪ S} for every S ⊆ J with |I ∪ S| >= 2.

    Returns:
        dict: Sorted index tuple -> exact Fraction
    """
    if alpha.d != ranks.d:
        raise DomainError(f"direction has {alpha.d} coordinates but ranks have {ranks.d} columns")
    part = partition_from_direction(alpha)
    terms = {}
    for subset in part.subsets_of_positives():
        support = part.union_with(subset)
        if len(support) >= 2:
            terms[support] = _exact_minus_subset(ranks, support)
    return terms


def assemble_decomposition(alpha, terms, n):
    """Combine margin estimators from ``decomposed_terms`` into the directional estimate (exact)."""
    part = partition_from_direction(alpha)
    total = Fraction(0)
    for subset in part.subsets_of_positives():
        support = part.union_with(subset)
        if len(support) >= 2:
            total += (-1) ** len(subset) * decomposition_weight(len(support)) * terms[support]
    return decomposition_prefactor(n, alpha.d) * total


def rho_hat_decomposed(ranks, alpha):
    """
    Directional estimator rebuilt from margin lower-orthant estimators.

    rho_hat^alpha = (n+1)^d / D * sum over S ⊆ J of (-1)^|S| w(|I ∪ S|) rho_hat^-_{I ∪ S},
    with w(k) = (2^k - (k+1)) / (2^k (k+1)). Agrees with ``rho_hat_directional`` exactly.

    Args:
        ranks (RankMatrix): n x d ranks
        alpha (Direction): Direction

    Returns:
        EstimatorResult: The assembled estimate
    """
    value = assemble_decomposition(alpha, decomposed_terms(ranks, alpha), ranks.n)
    return EstimatorResult(alpha, float(value), ranks.n, ranks.d, ranks.tie_count, value)


def _mean_pairwise_rho(ranks):
    pairs = list(itertools.combinations(range(ranks.d), 2))
    total = sum(_exact_directional(ranks.columns(pair), Direction.positive(2)) for pair in pairs)
    return float(total / len(pairs))


def rho_hat_star3(ranks):
    """Mean of the three pairwise Spearman estimators of a trivariate sample."""
    if ranks.d != 3:
        raise DomainError(f"rho_hat_3* is defined for d = 3, got d = {ranks.d}")
    return _mean_pairwise_rho(ranks)


def rho_hat_3_closed_form(ranks, alpha):
    """Trivariate estimator 8 / (n (n-1) (n+1)^2) * sum prod R^alpha - (n+1) / (n-1)."""
    if ranks.d != 3:
        raise DomainError(f"expected 3 columns, got {ranks.d}")
    n = ranks.n
    total = _product_sum(directional_ranks(ranks, alpha))
    return Fraction(8 * total, n * (n - 1) * (n + 1) ** 2) - Fraction(n + 1, n - 1)


def rho_hat_4_prefactor(n):
    """Decomposition prefactor at d = 4, 240 (n+1)^3 / (33n^3 + 27n^2 - 37n - 23)."""
    if n < 2:
        raise DomainError(f"estimators need n >= 2, got {n}")
    return Fraction(240 * (n + 1) ** 3, 33 * n ** 3 + 27 * n ** 2 - 37 * n - 23)


def estimator_prefactors(n, d):
    """
    Affine map between the integrated empirical process and the estimator.

    rho_hat = a_n * integral - b_n, where the integral is taken over the
    process signed like ``-alpha``.

    Returns:
        tuple: (a_n, b_n) as Fractions, a_n = (n+1)^{d+1} / (n D) and b_n = ((n+1)/2)^d / D
    """
    denominator = rank_denominator(n, d)
    return Fraction((n + 1) ** (d + 1), n) / denominator, Fraction(n + 1, 2) ** d / denominator


def limit_prefactors(d):
    """Limits of (a_n, b_n) as n grows: (c_d, (d+1) / (2^d - (d+1)))."""
    return normalization_constant(d), Fraction(d + 1, 2 ** d - (d + 1))


def empirical_process(ranks, spec, u):
    """
    Empirical copula process (1/(n+1)) sum_j prod_{i in beta} 1{s_i R_ij/(n+1) <= s_i u_i}.

    Args:
        ranks (RankMatrix): n x d ranks
        spec (EmpiricalProcessSpec): Coordinates and signs
        u (array-like): Point, or m x |beta| points, in the unit cube

    Returns:
        float or numpy.ndarray: Values in [0, n/(n+1)]
    """
    if max(spec.beta) >= ranks.d:
        raise DomainError(f"process coordinates {spec.beta} out of range for {ranks.d} columns")
    points = np.asarray(u, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.shape[1] != len(spec.beta):
        raise DomainError(f"expected points of dimension {len(spec.beta)}, got {points.shape[1]}")
    if np.any(points < 0.0) or np.any(points > 1.0) or not np.all(np.isfinite(points)):
        raise DomainError("process arguments must lie in [0, 1]")

    scaled = ranks.ranks[:, list(spec.beta)] / (ranks.n + 1.0)
    signs = np.array(spec.signs, dtype=float)
    # rows x points x coordinates
    inside = signs * scaled[:, None, :] <= signs * points[None, :, :]
    values = np.all(inside, axis=2).sum(axis=0) / (ranks.n + 1.0)
    return float(values[0]) if single else values


def _process_integral(ranks, spec):
    """
    Integral of the process over [0, 1]^|beta| by the midpoint rule on the rank grid.

    The process is constant on the cells of the (n+1)^|beta| grid, so cell
    midpoints give the integral exactly.
    """
    n = ranks.n
    midpoints = (np.arange(n + 1) + 0.5) / (n + 1)
    scaled = ranks.ranks[:, list(spec.beta)] / (n + 1.0)
    signs = np.array(spec.signs, dtype=float)[None, :, None]
    indicators = (signs * scaled[:, :, None] <= signs * midpoints[None, None, :]).astype(float)
    # cell sums factor into one grid axis per coordinate
    per_axis = indicators.mean(axis=2)
    return math.fsum(np.prod(per_axis, axis=1)) / (n + 1)


def estimator_via_process_integral(ranks, alpha):
    """
    Directional estimator recovered from the integrated empirical process.

    Args:
        ranks (RankMatrix): n x d ranks with d <= 4 and n <= MAX_PROCESS_SAMPLE_SIZE
        alpha (Direction): Direction

    Returns:
        float: a_n * integral - b_n; agrees with ``rho_hat_directional`` up to rounding
    """
    if alpha.d != ranks.d:
        raise DomainError(f"direction has {alpha.d} coordinates but ranks have {ranks.d} columns")
    if ranks.d > 4:
        raise DomainError(f"process integration is limited to d <= 4, got {ranks.d}")
    if ranks.n > MAX_PROCESS_SAMPLE_SIZE:
        raise DomainError(f"process integration is limited to n <= {MAX_PROCESS_SAMPLE_SIZE}, got {ranks.n}")
    integral = _process_integral(ranks, EmpiricalProcessSpec.for_direction(-alpha))
    a_n, b_n = estimator_prefactors(ranks.n, ranks.d)
    return float(a_n) * integral - float(b_n)


def estimate_all_directions(ranks, directions=None, limit=16):
    """
    Estimate every requested direction on one rank matrix.

    Args:
        ranks (RankMatrix): n x d ranks
        directions (list of Direction): Defaults to all 2^d directions
        limit (int): Largest d for which all directions are enumerated

    Returns:
        list: EstimatorResult per direction, in the order given
    """
    if directions is None:
        directions = all_directions(ranks.d, limit)
    results = [rho_hat_directional(ranks, alpha) for alpha in directions]
    logger.debug("estimated %d direction(s) on n=%d, d=%d", len(results), ranks.n, ranks.d)
    return results
