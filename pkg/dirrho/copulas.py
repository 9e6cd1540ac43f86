"""
Parametric copula models with CDF evaluation, margins and exact samplers.

Family spec strings used by the command line:
``clayton:theta=1.0:d=3``, ``fgm:lambda=0.6:d=3``, ``product:d=4``,
``comonotone:d=4``. A ``survival:`` prefix wraps any of them in its survival
copula, e.g. ``survival:clayton:theta=2:d=3``.
"""

import abc
import itertools
import logging
import math

import numpy as np

from dirrho.core import DataMatrix
from dirrho.errors import ConfigError, DataValidationError, DomainError

logger = logging.getLogger(__name__)

# Clayton parameters at or below this are evaluated as the product copula
CLAYTON_PRODUCT_TOLERANCE = 1e-8

_CUBE_TOLERANCE = 1e-12


class CopulaModel(abc.ABC):
    """Base class for d-dimensional copulas."""

    family = "abstract"

    def __init__(self, dimension):
        dimension = int(dimension)
        if dimension < 1:
            raise DomainError(f"copula dimension must be positive, got {dimension}")
        self.dimension = dimension

    @property
    def d(self):
        return self.dimension

    @property
    def parameters(self):
        """Family parameters as a name -> value mapping."""
        return {}

    @property
    def exchangeable(self):
        """True when every k-margin is the same copula regardless of which k coordinates."""
        return True

    @property
    def spec(self):
        """Family spec string that ``from_spec`` turns back into this model."""
        parts = [self.family] + [f"{k}={v!r}" for k, v in self.parameters.items()]
        return ":".join(parts + [f"d={self.dimension}"])

    def cdf(self, u):
        """
        Evaluate the copula at one or many points of the unit cube.

        Args:
            u (array-like): A point of length d, or an m x d array of points

        Returns:
            float or numpy.ndarray: C(u), a scalar for a single point
        """
        points = np.asarray(u, dtype=float)
        single = points.ndim == 1
        points = np.atleast_2d(points)
        if points.shape[-1] != self.dimension:
            raise DomainError(f"expected points of dimension {self.dimension}, got {points.shape[-1]}")
        if np.any(points < -_CUBE_TOLERANCE) or np.any(points > 1 + _CUBE_TOLERANCE):
            raise DomainError("cdf arguments must lie in the unit cube")
        values = np.clip(self._cdf(np.clip(points, 0.0, 1.0)), 0.0, 1.0)
        return float(values[0]) if single else values

    def margin(self, indices):
        """
        The margin over a nonempty subset of coordinates.

        Args:
            indices (iterable of int): Coordinates K to keep

        Returns:
            CopulaModel: A |K|-dimensional copula; the uniform margin when |K| = 1
        """
        indices = tuple(sorted(set(int(i) for i in indices)))
        if not indices:
            raise DomainError("a margin needs at least one coordinate")
        if indices[0] < 0 or indices[-1] >= self.dimension:
            raise DomainError(f"margin indices {indices} out of range for dimension {self.dimension}")
        if len(indices) == self.dimension:
            return self
        if len(indices) == 1:
            return ProductCopula(1)
        return self._margin(indices)

    def sample(self, count, rng):
        """
        Draw i.i.d. observations from the copula.

        Args:
            count (int): Number of rows
            rng (numpy.random.Generator): Externally owned generator

        Returns:
            numpy.ndarray: count x d array with entries in (0, 1)
        """
        count = int(count)
        if count < 1:
            raise DomainError(f"sample size must be positive, got {count}")
        return self._sample(count, rng)

    def cdf_integral(self):
        """Integral of C over the unit cube in closed form, or None when none is known."""
        return None

    def upper_moment(self):
        """E[prod U_i] in closed form, or None when none is known."""
        return None

    @abc.abstractmethod
    def _cdf(self, points):
        """C evaluated on an m x d array of points already inside the cube."""

    @abc.abstractmethod
    def _margin(self, indices):
        """Margin over 2 <= len(indices) < d coordinates."""

    @abc.abstractmethod
    def _sample(self, count, rng):
        """Draw ``count`` rows."""

    def __repr__(self):
        return f"{type(self).__name__}({self.spec!r})"

    def __eq__(self, other):
        return type(self) is type(other) and self.spec == other.spec

    def __hash__(self):
        return hash((type(self).__name__, self.spec))


class ProductCopula(CopulaModel):
    """Independence copula, the product of the coordinates."""

    family = "product"

    def _cdf(self, points):
        return np.prod(points, axis=1)

    def _margin(self, indices):
        return ProductCopula(len(indices))

    def _sample(self, count, rng):
        return 1.0 - rng.random((count, self.dimension))

    def cdf_integral(self):
        return 2.0 ** -self.dimension

    def upper_moment(self):
        return 2.0 ** -self.dimension


class ComonotoneCopula(CopulaModel):
    """Upper Frechet-Hoeffding bound, min(u)."""

    family = "comonotone"

    def _cdf(self, points):
        return np.min(points, axis=1)

    def _margin(self, indices):
        return ComonotoneCopula(len(indices))

    def _sample(self, count, rng):
        v = 1.0 - rng.random(count)
        return np.repeat(v[:, None], self.dimension, axis=1)

    def cdf_integral(self):
        return 1.0 / (self.dimension + 1)

    def upper_moment(self):
        return 1.0 / (self.dimension + 1)


class FgmCopula(CopulaModel):
    """
    Farlie-Gumbel-Morgenstern copula prod(u) * (1 + lam * prod(1 - u)).

    Args:
        lam (float): Perturbation parameter in [-1, 1]
        dimension (int): Dimension d >= 2
    """

    family = "fgm"

    def __init__(self, lam, dimension=2):
        super().__init__(dimension)
        if dimension < 2:
            raise DomainError("the FGM family needs d >= 2")
        lam = float(lam)
        if not -1.0 <= lam <= 1.0:
            raise DomainError(f"FGM parameter must lie in [-1, 1], got {lam}")
        self.lam = lam

    @property
    def parameters(self):
        return {"lambda": self.lam}

    def _cdf(self, points):
        return np.prod(points, axis=1) * (1.0 + self.lam * np.prod(1.0 - points, axis=1))

    def _margin(self, indices):
        # every proper margin loses the perturbation term
        return ProductCopula(len(indices))

    def density(self, points):
        return 1.0 + self.lam * np.prod(1.0 - 2.0 * points, axis=1)

    def _sample(self, count, rng):
        # rejection from the uniform proposal; the density is bounded by 1 + |lam|
        bound = 1.0 + abs(self.lam)
        accepted = []
        remaining = count
        while remaining > 0:
            batch = int(math.ceil(remaining * bound * 1.1)) + 16
            proposal = 1.0 - rng.random((batch, self.dimension))
            keep = rng.random(batch) * bound < self.density(proposal)
            chosen = proposal[keep][:remaining]
            accepted.append(chosen)
            remaining -= len(chosen)
        return np.concatenate(accepted, axis=0)

    def cdf_integral(self):
        return 2.0 ** -self.dimension + self.lam * 6.0 ** -self.dimension

    def upper_moment(self):
        # each coordinate contributes the integral of u (1 - 2u), which is -1/6
        return 2.0 ** -self.dimension + (-1) ** self.dimension * self.lam * 6.0 ** -self.dimension


class ClaytonCopula(CopulaModel):
    """
    Clayton copula (sum(u^-theta) - d + 1)^(-1/theta).

    Args:
        theta (float): Dependence parameter, theta >= 0; values at or below
            1e-8 are evaluated as the product copula
        dimension (int): Dimension d >= 2
    """

    family = "clayton"

    def __init__(self, theta, dimension=2):
        super().__init__(dimension)
        if dimension < 2:
            raise DomainError("the Clayton family needs d >= 2")
        theta = float(theta)
        if not theta >= 0.0 or not math.isfinite(theta):
            raise DomainError(f"Clayton parameter must be a finite value >= 0, got {theta}")
        self.theta = theta

    @property
    def parameters(self):
        return {"theta": self.theta}

    @property
    def is_product(self):
        return self.theta <= CLAYTON_PRODUCT_TOLERANCE

    def _cdf(self, points):
        if self.is_product:
            return np.prod(points, axis=1)
        with np.errstate(divide="ignore", over="ignore"):
            radial = np.sum(points ** -self.theta, axis=1) - self.dimension + 1.0
            radial = np.maximum(radial, 0.0)
            return np.where(radial > 0.0, radial ** (-1.0 / self.theta), 0.0)

    def _margin(self, indices):
        return ClaytonCopula(self.theta, len(indices))

    def cdf_integral(self):
        return 2.0 ** -self.dimension if self.is_product else None

    def upper_moment(self):
        return self.cdf_integral()

    def _sample(self, count, rng):
        if self.is_product:
            return 1.0 - rng.random((count, self.dimension))
        # Marshall-Olkin frailty: W ~ Gamma(1/theta), U_i = (1 + E_i / W)^(-1/theta)
        frailty = rng.gamma(shape=1.0 / self.theta, scale=1.0, size=count)
        exponentials = rng.exponential(scale=1.0, size=(count, self.dimension))
        with np.errstate(divide="ignore", over="ignore"):
            u = (1.0 + exponentials / frailty[:, None]) ** (-1.0 / self.theta)
        return np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)


class SurvivalCopula(CopulaModel):
    """
    Survival copula of a base model, the law of 1 - U for U ~ base.

    The CDF is evaluated by inclusion-exclusion over base margins.
    """

    family = "survival"

    def __init__(self, base):
        super().__init__(base.dimension)
        self.base = base

    @property
    def parameters(self):
        return self.base.parameters

    @property
    def exchangeable(self):
        return self.base.exchangeable

    @property
    def spec(self):
        return f"survival:{self.base.spec}"

    def _cdf(self, points):
        reflected = 1.0 - points
        total = np.ones(points.shape[0])
        for size in range(1, self.dimension + 1):
            sign = (-1.0) ** size
            for subset in itertools.combinations(range(self.dimension), size):
                margin = self.base.margin(subset)
                total += sign * margin.cdf(reflected[:, subset])
        return total

    def _margin(self, indices):
        return SurvivalCopula(self.base.margin(indices))

    def cdf_integral(self):
        # the survival cdf integrates to E[prod U_i] of the base
        return self.base.upper_moment()

    def upper_moment(self):
        return self.base.cdf_integral()

    def _sample(self, count, rng):
        return 1.0 - self.base.sample(count, rng)


def survival_reflect(data):
    """
    Reflect observations in the open unit cube, x -> 1 - x.

    Args:
        data (numpy.ndarray or DataMatrix): Values strictly inside (0, 1)

    Returns:
        Same type as ``data``, reflected entry-wise
    """
    values = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=float)
    outside = np.argwhere(~((values > 0.0) & (values < 1.0)))
    if outside.size:
        location = outside[0]
        column = int(location[1]) if values.ndim == 2 else None
        raise DataValidationError("survival reflection needs entries in (0, 1)",
                                  row=int(location[0]) + 1, column=column)
    reflected = 1.0 - values
    return DataMatrix(reflected) if isinstance(data, DataMatrix) else reflected


_FAMILIES = {
    "product": (ProductCopula, None),
    "independence": (ProductCopula, None),
    "comonotone": (ComonotoneCopula, None),
    "fgm": (FgmCopula, "lambda"),
    "clayton": (ClaytonCopula, "theta"),
}


def parameter_name(family):
    """Name of the single parameter of a family, or None for parameter-free families."""
    try:
        return _FAMILIES[family.lower()][1]
    except KeyError:
        raise ConfigError(f"unknown copula family {family!r}; known: {sorted(_FAMILIES)}") from None


def make_copula(family, dimension, parameter=None):
    """
    Build a copula from its family name.

    Args:
        family (str): One of product, comonotone, fgm, clayton
        dimension (int): Dimension d
        parameter (float): lambda for fgm, theta for clayton; ignored otherwise

    Returns:
        CopulaModel: The model
    """
    name = parameter_name(family)
    cls = _FAMILIES[family.lower()][0]
    if name is None:
        return cls(dimension)
    if parameter is None:
        raise ConfigError(f"family {family!r} needs parameter {name!r}")
    return cls(parameter, dimension)


def from_spec(text):
    """
    Parse a family spec string such as ``clayton:theta=1.0:d=3``.

    Args:
        text (str): Spec string

    Returns:
        CopulaModel: The described model
    """
    text = text.strip()
    if text.lower().startswith("survival:"):
        return SurvivalCopula(from_spec(text[len("survival:"):]))
    family, *fields = text.split(":")
    options = {}
    for item in fields:
        key, sep, value = item.partition("=")
        if not sep or not key or not value:
            raise ConfigError(f"malformed field {item!r} in family spec {text!r}")
        options[key.strip().lower()] = value.strip()
    if "d" not in options:
        raise ConfigError(f"family spec {text!r} is missing the dimension field d=...")
    try:
        dimension = int(options.pop("d"))
    except ValueError:
        raise ConfigError(f"dimension in {text!r} is not an integer") from None
    name = parameter_name(family)
    parameter = None
    if name is not None:
        raw = options.pop(name, None)
        if raw is None:
            raise ConfigError(f"family spec {text!r} is missing {name}=...")
        try:
            parameter = float(raw)
        except ValueError:
            raise ConfigError(f"{name} in {text!r} is not a number") from None
    if options:
        raise ConfigError(f"unexpected field(s) {sorted(options)} in family spec {text!r}")
    return make_copula(family, dimension, parameter)
