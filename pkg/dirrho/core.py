"""
Shared vocabulary for directional dependence: directions, sign partitions,
data and rank matrices, pseudo-observations and normalization constants.

Indices are 0-based throughout the package. A direction ``alpha`` tracks large
values of coordinate ``i`` when ``alpha[i] == 1`` and small values when
``alpha[i] == -1``.
"""

import enum
import itertools
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np
from scipy.stats import rankdata

from dirrho.errors import DataValidationError, DomainError

logger = logging.getLogger(__name__)

_TUPLE_PATTERN = re.compile(r"^\(?\s*[+-]?1(\s*,\s*[+-]?1)+\s*\)?$")
_COMPACT_PATTERN = re.compile(r"^[+-]{2,}$")


@dataclass(frozen=True)
class Direction:
    """A vector of +1/-1 signs of length d >= 2."""

    signs: Tuple[int, ...]

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        if len(signs) < 2:
            raise DomainError(f"a direction needs at least 2 coordinates, got {len(signs)}")
        if any(s not in (1, -1) for s in signs):
            raise DomainError(f"direction entries must be +1 or -1, got {self.signs}")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def parse(cls, text):
        """
        Parse a direction from its tuple form or its compact form.

        Args:
            text (str): ``"(-1,1,1,-1)"``, ``"-1,1,1,-1"`` or ``"-++-"``

        Returns:
            Direction: The parsed direction
        """
        text = text.strip()
        if _COMPACT_PATTERN.match(text):
            return cls(tuple(1 if c == "+" else -1 for c in text))
        if _TUPLE_PATTERN.match(text):
            return cls(tuple(int(tok) for tok in text.strip("()").split(",")))
        raise DomainError(f"cannot parse direction {text!r}")

    @classmethod
    def positive(cls, d):
        return cls((1,) * d)

    @classmethod
    def negative(cls, d):
        return cls((-1,) * d)

    @property
    def d(self):
        return len(self.signs)

    @property
    def negative_count(self):
        """Number of -1 entries (k in the comonotone closed form)."""
        return sum(1 for s in self.signs if s == -1)

    def as_array(self):
        return np.array(self.signs, dtype=np.int64)

    def compact(self):
        return "".join("+" if s == 1 else "-" for s in self.signs)

    def restrict(self, indices):
        """Signs of the coordinates in ``indices``, as a tuple."""
        return tuple(self.signs[i] for i in indices)

    def __neg__(self):
        return Direction(tuple(-s for s in self.signs))

    def __len__(self):
        return len(self.signs)

    def __iter__(self):
        return iter(self.signs)

    def __str__(self):
        return "(" + ",".join(str(s) for s in self.signs) + ")"


@dataclass(frozen=True)
class SignPartition:
    """
    Split of the coordinates of a direction.

    ``negatives`` (I) holds the indices with sign -1 and ``positives`` (J)
    those with sign +1, both in increasing order.
    """

    negatives: Tuple[int, ...]
    positives: Tuple[int, ...]
    d: int

    def __post_init__(self):
        both = set(self.negatives) | set(self.positives)
        if set(self.negatives) & set(self.positives) or both != set(range(self.d)):
            raise DomainError("negatives and positives must partition range(d)")

    def subsets_of_positives(self):
        """Yield every subset S of J, smallest first, as sorted tuples."""
        for size in range(len(self.positives) + 1):
            yield from itertools.combinations(self.positives, size)

    def union_with(self, subset):
        """Sorted tuple I ∪ S."""
        return tuple(sorted(self.negatives + tuple(subset)))


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """n x d matrix of finite observations, rows are observations."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataValidationError(f"data must be a 2-D matrix, got {values.ndim} dimension(s)")
        n, d = values.shape
        if n < 2:
            raise DataValidationError(f"need at least 2 observations, got {n}")
        if d < 2:
            raise DataValidationError(f"need at least 2 variables, got {d}")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            row, column = bad[0]
            raise DataValidationError("non-finite entry", row=int(row) + 1, column=int(column))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class RankMatrix:
    """Column-wise ranks 1..n of a data matrix.

    ``tie_counts`` records, per column, how many ties the tie policy had to break.
    """

    ranks: np.ndarray
    tie_counts: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        ranks = np.array(self.ranks, dtype=np.int64)
        if ranks.ndim != 2 or ranks.shape[0] < 2 or ranks.shape[1] < 1:
            raise DataValidationError(f"rank matrix must be n x d with n >= 2, got shape {ranks.shape}")
        n, d = ranks.shape
        expected = np.arange(1, n + 1)
        for j in range(d):
            if not np.array_equal(np.sort(ranks[:, j]), expected):
                raise DataValidationError("rank column is not a permutation of 1..n", column=j)
        tie_counts = tuple(int(t) for t in self.tie_counts) or (0,) * d
        if len(tie_counts) != d:
            raise DataValidationError(f"expected {d} tie counts, got {len(tie_counts)}")
        ranks.setflags(write=False)
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "tie_counts", tie_counts)

    @property
    def n(self):
        return self.ranks.shape[0]

    @property
    def d(self):
        return self.ranks.shape[1]

    @property
    def tie_count(self):
        return sum(self.tie_counts)

    def columns(self, indices):
        """Rank matrix restricted to the given columns."""
        indices = list(indices)
        return RankMatrix(self.ranks[:, indices], tuple(self.tie_counts[i] for i in indices))

    def reflected(self):
        """Ranks of the reflected data, n + 1 - R."""
        return RankMatrix(self.n + 1 - self.ranks, self.tie_counts)

    def pseudo_observations(self):
        return PseudoObservations.from_ranks(self)


@dataclass(frozen=True, eq=False)
class PseudoObservations:
    """Ranks scaled into the open unit cube, u = R / (n + 1)."""

    u: np.ndarray

    @classmethod
    def from_ranks(cls, ranks):
        u = ranks.ranks / (ranks.n + 1.0)
        u.setflags(write=False)
        return cls(u)

    @property
    def n(self):
        return self.u.shape[0]

    @property
    def d(self):
        return self.u.shape[1]


class Method(enum.Enum):
    CLOSED_FORM = "closed_form"
    DECOMPOSITION = "decomposition"
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte_carlo"
    RANK_ESTIMATOR = "rank_estimator"


@dataclass(frozen=True)
class CoefficientEstimate:
    """A coefficient value together with how it was obtained.

    ``converged`` is False when a Monte Carlo integration missed its target
    standard error.
    """

    value: float
    method: Method
    std_error: Optional[float] = None
    sample_count: Optional[int] = None
    converged: bool = True

    def __post_init__(self):
        if self.std_error is not None:
            if self.method not in (Method.MONTE_CARLO, Method.RANK_ESTIMATOR):
                raise DomainError(f"{self.method.value} estimates carry no standard error")
            if self.std_error < 0:
                raise DomainError("standard error must be nonnegative")
        elif self.method is Method.MONTE_CARLO:
            raise DomainError("Monte Carlo estimates need a standard error")


class TiePolicy(enum.Enum):
    STABLE = "stable"
    RANDOM = "random"


def normalization_constant(d):
    """
    Prefactor 2^d (d+1) / (2^d - (d+1)) of the directional coefficient.

    Args:
        d (int): Dimension, at least 2

    Returns:
        Fraction: The exact constant (12 for d=2, 8 for d=3, 80/11 for d=4)
    """
    if d < 2:
        raise DomainError(f"normalization constant needs d >= 2, got {d}")
    return Fraction(2 ** d * (d + 1), 2 ** d - (d + 1))


def decomposition_weight(k):
    """Weight (2^k - (k+1)) / (2^k (k+1)) of a k-dimensional lower-orthant term; zero for k <= 1."""
    return Fraction(2 ** k - (k + 1), 2 ** k * (k + 1))


def partition_from_direction(alpha):
    """
    Split a direction into its negative (I) and positive (J) index sets.

    Args:
        alpha (Direction): Direction to split

    Returns:
        SignPartition: I = {i: alpha_i = -1}, J = {i: alpha_i = +1}
    """
    negatives = tuple(i for i, s in enumerate(alpha.signs) if s == -1)
    positives = tuple(i for i, s in enumerate(alpha.signs) if s == 1)
    return SignPartition(negatives, positives, alpha.d)


def all_directions(d, limit=20):
    """
    Enumerate the 2^d directions of dimension d, all-positive first.

    Args:
        d (int): Dimension
        limit (int): Largest dimension that may be enumerated

    Returns:
        list: Directions in lexicographic order of (+1, -1) signs
    """
    if d < 2:
        raise DomainError(f"directions need d >= 2, got {d}")
    if d > limit:
        raise DomainError(f"refusing to enumerate 2^{d} directions (limit d <= {limit})")
    return [Direction(signs) for signs in itertools.product((1, -1), repeat=d)]


def _as_data_matrix(data):
    return data if isinstance(data, DataMatrix) else DataMatrix(data)


def compute_ranks(data, tie_policy=TiePolicy.STABLE, rng=None):
    """
    Rank every column of a data matrix.

    Ties are broken by row order under the stable policy, or by a random
    permutation drawn from ``rng`` under the random policy.

    Args:
        data (DataMatrix or array-like): Observations, n x d
        tie_policy (TiePolicy or str): ``"stable"`` (default) or ``"random"``
        rng (numpy.random.Generator or int): Required for the random policy

    Returns:
        RankMatrix: Ranks with per-column tie counts
    """
    data = _as_data_matrix(data)
    tie_policy = TiePolicy(tie_policy)
    values = data.values

    if tie_policy is TiePolicy.RANDOM:
        if rng is None:
            raise DomainError("random tie-breaking needs an explicit seed or generator")
        rng = np.random.default_rng(rng)
        order = rng.permutation(data.n)
        ranks = np.empty(values.shape, dtype=np.int64)
        ranks[order] = rankdata(values[order], method="ordinal", axis=0)
    else:
        ranks = rankdata(values, method="ordinal", axis=0).astype(np.int64)

    tie_counts = tuple(int(data.n - np.unique(values[:, j]).size) for j in range(data.d))
    if any(tie_counts):
        logger.warning("broke %d tied value(s) per column %s using the %s policy",
                       sum(tie_counts), list(tie_counts), tie_policy.value)
    return RankMatrix(ranks, tie_counts)


def directional_ranks(ranks, alpha):
    """
    Ranks oriented along a direction: R where alpha_i = +1, n + 1 - R where alpha_i = -1.

    Args:
        ranks (RankMatrix): Column ranks
        alpha (Direction): Direction with ``alpha.d == ranks.d``

    Returns:
        numpy.ndarray: n x d integer matrix
    """
    if alpha.d != ranks.d:
        raise DomainError(f"direction has {alpha.d} coordinates but ranks have {ranks.d} columns")
    return np.where(alpha.as_array() == 1, ranks.ranks, ranks.n + 1 - ranks.ranks)
