"""
Numerical integration over the unit cube: tensor Gauss-Legendre quadrature
and chunked Monte Carlo expectations over copula samples.
"""

import enum
import functools
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from dirrho.errors import DomainError, IntegrationError

logger = logging.getLogger(__name__)

MIN_QUADRATURE_NODES = 8
MIN_MONTE_CARLO_SAMPLES = 10_000

# points evaluated per quadrature batch
_QUADRATURE_BATCH = 1 << 18


class IntegrationMethod(enum.Enum):
    GAUSS_LEGENDRE_TENSOR = "gauss_legendre_tensor"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class IntegratorConfig:
    """
    How population coefficients are integrated.

    Args:
        method (IntegrationMethod): Quadrature or Monte Carlo
        nodes_per_dim (int): Gauss-Legendre nodes per axis for d <= 4
        nodes_per_dim_high (int): Nodes per axis when d == max_quadrature_dim
        max_quadrature_dim (int): Above this dimension quadrature falls back to Monte Carlo
        sample_count (int): Monte Carlo sample size
        chunk_size (int): Rows drawn per Monte Carlo sub-stream
        seed (int): Master seed of the Monte Carlo sub-streams
        target_std_error (float): Monte Carlo standard error target
        strict (bool): Raise instead of warning when the target is missed
    """

    method: IntegrationMethod = IntegrationMethod.GAUSS_LEGENDRE_TENSOR
    nodes_per_dim: int = 32
    nodes_per_dim_high: int = 16
    max_quadrature_dim: int = 5
    sample_count: int = 1_000_000
    chunk_size: int = 100_000
    seed: int = 20240101
    target_std_error: float = 1e-3
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", IntegrationMethod(self.method))
        if self.nodes_per_dim < MIN_QUADRATURE_NODES or self.nodes_per_dim_high < MIN_QUADRATURE_NODES:
            raise DomainError(f"quadrature needs at least {MIN_QUADRATURE_NODES} nodes per dimension")
        if self.sample_count < MIN_MONTE_CARLO_SAMPLES:
            raise DomainError(f"Monte Carlo needs at least {MIN_MONTE_CARLO_SAMPLES} samples")
        if self.chunk_size < 1:
            raise DomainError("chunk size must be positive")
        if self.target_std_error <= 0:
            raise DomainError("target standard error must be positive")

    @classmethod
    def from_settings(cls, section):
        """Build a config from the ``integration`` section of the settings file."""
        return cls(
            method=section.get("method", cls.method.value),
            nodes_per_dim=section.get("nodes_per_dim", cls.nodes_per_dim),
            nodes_per_dim_high=section.get("nodes_per_dim_high", cls.nodes_per_dim_high),
            max_quadrature_dim=section.get("max_quadrature_dim", cls.max_quadrature_dim),
            sample_count=section.get("mc_sample_count", cls.sample_count),
            chunk_size=section.get("mc_chunk_size", cls.chunk_size),
            seed=section.get("seed", cls.seed),
            target_std_error=section.get("target_std_error", cls.target_std_error),
        )

    def with_method(self, method):
        return replace(self, method=IntegrationMethod(method))

    def uses_quadrature(self, d):
        return self.method is IntegrationMethod.GAUSS_LEGENDRE_TENSOR and d <= self.max_quadrature_dim

    def nodes_for(self, d):
        return self.nodes_per_dim_high if d >= 5 else self.nodes_per_dim


@functools.lru_cache(maxsize=32)
def gauss_legendre_rule(nodes):
    """
    Gauss-Legendre nodes and weights mapped to [0, 1].

    Args:
        nodes (int): Number of nodes

    Returns:
        tuple: (points, weights), read-only arrays of length ``nodes``
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    points, weights = 0.5 * (x + 1.0), 0.5 * w
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


def _tensor_batches(d, nodes):
    points, weights = gauss_legendre_rule(nodes)
    total = nodes ** d
    for start in range(0, total, _QUADRATURE_BATCH):
        flat = np.arange(start, min(start + _QUADRATURE_BATCH, total))
        digits = np.empty((flat.size, d), dtype=np.int64)
        rest = flat
        for axis in range(d - 1, -1, -1):
            digits[:, axis] = rest % nodes
            rest = rest // nodes
        yield points[digits], np.prod(weights[digits], axis=1)


def integrate_cube(func, d, nodes):
    """
    Integrate a vectorized function over [0, 1]^d with a tensor Gauss-Legendre rule.

    Args:
        func (callable): Maps an m x d array of points to m values
        d (int): Dimension
        nodes (int): Nodes per dimension

    Returns:
        float: The quadrature value
    """
    if d == 0:
        return 1.0
    partial = []
    for batch, weights in _tensor_batches(d, nodes):
        values = np.asarray(func(batch), dtype=float)
        if not np.all(np.isfinite(values)):
            raise IntegrationError("integrand returned non-finite values")
        partial.append(float(np.dot(weights, values)))
    return math.fsum(partial)


def _chunk_rng(seed, chunk):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def monte_carlo_moments(model, functions, cfg):
    """
    Monte Carlo means of several functions of one shared copula sample.

    Every chunk draws from its own sub-stream keyed by (seed, chunk index),
    and chunk sums are merged with compensated summation.

    Args:
        model (CopulaModel): Model to sample
        functions (list of callable): Each maps an m x d sample to m values
        cfg (IntegratorConfig): Sample size, chunking and seed

    Returns:
        list: (mean, standard error) per function
    """
    sums = [[] for _ in functions]
    squares = [[] for _ in functions]
    drawn = 0
    chunk = 0
    while drawn < cfg.sample_count:
        size = min(cfg.chunk_size, cfg.sample_count - drawn)
        sample = model.sample(size, _chunk_rng(cfg.seed, chunk))
        for k, func in enumerate(functions):
            values = np.asarray(func(sample), dtype=float)
            sums[k].append(float(values.sum()))
            squares[k].append(float(np.dot(values, values)))
        drawn += size
        chunk += 1

    moments = []
    n = cfg.sample_count
    for total, total_sq in zip(sums, squares):
        mean = math.fsum(total) / n
        variance = max(math.fsum(total_sq) / n - mean * mean, 0.0) * n / (n - 1)
        moments.append((mean, math.sqrt(variance / n)))
    logger.debug("Monte Carlo moments of %s from %d samples in %d chunk(s)", model.spec, n, chunk)
    return moments


def check_std_error(std_error, target, what, strict=False):
    """
    Flag a Monte Carlo result whose standard error misses the target.

    Returns:
        bool: True when the target was met
    """
    if std_error <= target:
        return True
    message = f"{what}: standard error {std_error:.3g} exceeds target {target:.3g}"
    if strict:
        raise IntegrationError(message)
    logger.warning(message)
    return False
