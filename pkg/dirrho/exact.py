"""
Population directional rho-coefficients of copula models.

For a direction alpha with negative set I and positive set J,

    rho^alpha(C) = c_d * (E[prod_{i in I} (1 - U_i) * prod_{j in J} U_j] - 2^-d),

with c_d = 2^d (d+1) / (2^d - (d+1)). The lower-orthant coefficient rho^- is the
I = {1..d} case, where the expectation equals the integral of C over the cube.
Every rho^alpha is a fixed linear combination of rho^- of the margins C_{I ∪ S},
S ⊆ J.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np
from scipy.special import comb

from dirrho.copulas import ClaytonCopula, ComonotoneCopula, FgmCopula, ProductCopula, SurvivalCopula
from dirrho.core import (
    CoefficientEstimate,
    Direction,
    Method,
    all_directions,
    decomposition_weight,
    normalization_constant,
    partition_from_direction,
)
from dirrho.errors import DomainError
from dirrho.integrate import IntegratorConfig, check_std_error, integrate_cube, monte_carlo_moments

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DirectionalRho:
    """A population coefficient for one direction, tagged with the model it belongs to."""

    direction: Direction
    estimate: CoefficientEstimate
    family: str
    parameters: dict = field(default_factory=dict)

    @property
    def value(self):
        return self.estimate.value


def _config(cfg):
    return cfg if cfg is not None else IntegratorConfig()


def _check_dimensions(model, alpha):
    if model.d != alpha.d:
        raise DomainError(f"model has dimension {model.d} but direction has {alpha.d} coordinates")


def _orientation_products(alpha):
    """Map a sample u to prod over I of (1 - u) times prod over J of u."""
    negative = np.array([s == -1 for s in alpha.signs])

    def products(u):
        return np.prod(np.where(negative, 1.0 - u, u), axis=1)

    return products


def _affine(d, expectation):
    return float(normalization_constant(d)) * (expectation - 2.0 ** -d)


def _monte_carlo_estimate(model, alpha, cfg, what):
    (mean, std_error), = monte_carlo_moments(model, [_orientation_products(alpha)], cfg)
    c = float(normalization_constant(model.d))
    converged = check_std_error(c * std_error, cfg.target_std_error, what, cfg.strict)
    return CoefficientEstimate(
        value=_affine(model.d, mean),
        method=Method.MONTE_CARLO,
        std_error=c * std_error,
        sample_count=cfg.sample_count,
        converged=converged,
    )


def rho_minus(model, cfg=None):
    """
    Lower-orthant coefficient c_d * (integral of C - 2^-d).

    Args:
        model (CopulaModel): Model of dimension d >= 2
        cfg (IntegratorConfig): Quadrature for d <= max_quadrature_dim, else Monte Carlo

    Returns:
        CoefficientEstimate: 0 for the product copula, 1 for the comonotone copula;
        tagged ``closed_form`` when the model knows its integral exactly
    """
    cfg = _config(cfg)
    d = model.d
    if d < 2:
        raise DomainError(f"rho^- needs a model of dimension >= 2, got {d}")
    closed = model.cdf_integral()
    if closed is not None:
        return CoefficientEstimate(_affine(d, closed), Method.CLOSED_FORM)
    if cfg.uses_quadrature(d):
        integral = integrate_cube(model.cdf, d, cfg.nodes_for(d))
        logger.debug("integral of %s = %.12g", model.spec, integral)
        return CoefficientEstimate(_affine(d, integral), Method.QUADRATURE)
    return _monte_carlo_estimate(model, Direction.negative(d), cfg, f"rho^- of {model.spec}")


def rho_plus(model, cfg=None):
    """
    Upper-orthant coefficient c_d * (E[prod U_i] - 2^-d).

    The quadrature route integrates the survival copula, whose integral is E[prod U_i].
    """
    cfg = _config(cfg)
    d = model.d
    if d < 2:
        raise DomainError(f"rho^+ needs a model of dimension >= 2, got {d}")
    closed = model.upper_moment()
    if closed is not None:
        return CoefficientEstimate(_affine(d, closed), Method.CLOSED_FORM)
    if cfg.uses_quadrature(d):
        integral = integrate_cube(SurvivalCopula(model).cdf, d, cfg.nodes_for(d))
        return CoefficientEstimate(_affine(d, integral), Method.QUADRATURE)
    return _monte_carlo_estimate(model, Direction.positive(d), cfg, f"rho^+ of {model.spec}")


class _MarginIntegrals:
    """Memoized integrals of C_K over [0,1]^|K|, keyed by |K| for exchangeable models."""

    def __init__(self, model, cfg):
        self.model = model
        self.cfg = cfg
        self._cache = {}

    def _key(self, subset):
        return len(subset) if self.model.exchangeable else subset

    def integral(self, subset):
        if not subset:
            return 1.0
        key = self._key(subset)
        if key not in self._cache:
            margin = self.model.margin(subset)
            closed = margin.cdf_integral()
            if closed is None:
                closed = integrate_cube(margin.cdf, len(subset), self.cfg.nodes_for(len(subset)))
            self._cache[key] = closed
        return self._cache[key]

    def rho_minus(self, subset):
        key = ("rho", self._key(subset))
        if key not in self._cache:
            self._cache[key] = rho_minus(self.model.margin(subset), self.cfg)
        return self._cache[key]


def rho_directional_definition(model, alpha, cfg=None):
    """
    Directional coefficient straight from its definition.

    With Monte Carlo the expectation of prod_I (1 - U) prod_J U is averaged over
    copula samples; with quadrature it is expanded as
    sum over S ⊆ J of (-1)^|S| times the integral of C_{I ∪ S}.

    Args:
        model (CopulaModel): Model of dimension d
        alpha (Direction): Direction of dimension d
        cfg (IntegratorConfig): Integration settings

    Returns:
        CoefficientEstimate: The coefficient
    """
    cfg = _config(cfg)
    _check_dimensions(model, alpha)
    if not cfg.uses_quadrature(model.d):
        return _monte_carlo_estimate(model, alpha, cfg, f"rho^{alpha} of {model.spec}")

    part = partition_from_direction(alpha)
    integrals = _MarginIntegrals(model, cfg)
    terms = [(-1) ** len(s) * integrals.integral(part.union_with(s)) for s in part.subsets_of_positives()]
    return CoefficientEstimate(_affine(model.d, math.fsum(terms)), Method.QUADRATURE)


def decomposition_terms(alpha):
    """
    Exact coefficients of rho^alpha as a combination of margin rho^- values.

    Args:
        alpha (Direction): Direction

    Returns:
        list: (K, Fraction) pairs, K a sorted index tuple with |K| >= 2
    """
    part = partition_from_direction(alpha)
    c = normalization_constant(alpha.d)
    terms = []
    for subset in part.subsets_of_positives():
        support = part.union_with(subset)
        if len(support) <= 1:
            continue
        terms.append((support, (-1) ** len(subset) * c * decomposition_weight(len(support))))
    return terms


def rho_directional_decomposition(model, alpha, cfg=None):
    """
    Directional coefficient assembled from rho^- of the margins C_{I ∪ S}.

    Args:
        model (CopulaModel): Model with margin extraction
        alpha (Direction): Direction of dimension d
        cfg (IntegratorConfig): Integration settings for every margin

    Returns:
        CoefficientEstimate: Tagged ``decomposition`` when every term came from
        quadrature, ``monte_carlo`` with a combined standard error otherwise
    """
    cfg = _config(cfg)
    _check_dimensions(model, alpha)
    margins = _MarginIntegrals(model, cfg)
    values, errors, converged = [], [], True
    for support, coefficient in decomposition_terms(alpha):
        term = margins.rho_minus(support)
        values.append(float(coefficient) * term.value)
        converged = converged and term.converged
        if term.std_error is not None:
            errors.append(abs(float(coefficient)) * term.std_error)
        logger.debug("rho^- over %s = %.10g (coefficient %s)", support, term.value, coefficient)

    value = math.fsum(values)
    if errors:
        # terms share sub-streams, so errors are added rather than combined in quadrature
        return CoefficientEstimate(value, Method.MONTE_CARLO, std_error=math.fsum(errors),
                                   sample_count=cfg.sample_count, converged=converged)
    return CoefficientEstimate(value, Method.DECOMPOSITION)


def closed_form_mn(alpha):
    """
    Directional coefficient of the comonotone copula M_d.

    Args:
        alpha (Direction): Direction with k entries equal to -1

    Returns:
        Fraction: 1 when k is 0 or d, else c_d * (k! (d-k)! / (d+1)! - 2^-d)
    """
    d, k = alpha.d, alpha.negative_count
    if k in (0, d):
        return Fraction(1)
    return normalization_constant(d) * (
        Fraction(1, (d + 1) * int(comb(d, k, exact=True))) - Fraction(1, 2 ** d)
    )


def fgm_coefficient(d):
    """Slope 2^d (d+1) / ((2^d - (d+1)) 6^d) of the FGM coefficient in lambda."""
    return normalization_constant(d) / 6 ** d


def closed_form_fgm(alpha, lam):
    """
    Directional coefficient of the FGM copula, (-1)^|J| * 2^d (d+1) lam / ((2^d - (d+1)) 6^d).

    Args:
        alpha (Direction): Direction
        lam (float or Fraction): Parameter in [-1, 1]; rational input gives an exact result

    Returns:
        Fraction or float: 5 lam / 891 at d = 4 for even |J|
    """
    if not -1 <= lam <= 1:
        raise DomainError(f"FGM parameter must lie in [-1, 1], got {lam}")
    sign = (-1) ** len(partition_from_direction(alpha).positives)
    slope = sign * fgm_coefficient(alpha.d)
    if isinstance(lam, Rational):
        return slope * Fraction(lam)
    return float(slope) * float(lam)


def fgm_pd_order_holds(alpha, lam1, lam2):
    """
    Whether the FGM coefficients of two parameters are ordered like the parameters.

    The comparison flips with (-1)^|J|, matching the sign of the closed form.
    """
    sign = (-1) ** len(partition_from_direction(alpha).positives)
    ordered_coefficients = closed_form_fgm(alpha, lam1) <= closed_form_fgm(alpha, lam2)
    return ordered_coefficients == (sign * lam1 <= sign * lam2)


def sum_over_directions(model, cfg=None, limit=20):
    """
    Sum of rho^alpha over all 2^d directions; zero for every copula.

    The Monte Carlo route evaluates every direction on one shared sample, so
    the sum cancels up to rounding.

    Args:
        model (CopulaModel): Model of dimension d <= ``limit``
        cfg (IntegratorConfig): Integration settings
        limit (int): Largest dimension to enumerate

    Returns:
        float: The sum
    """
    cfg = _config(cfg)
    directions = all_directions(model.d, limit)
    if cfg.uses_quadrature(model.d):
        return math.fsum(rho_directional_definition(model, a, cfg).value for a in directions)
    moments = monte_carlo_moments(model, [_orientation_products(a) for a in directions], cfg)
    return math.fsum(_affine(model.d, mean) for mean, _ in moments)


def orthant_probability(model, alpha, u):
    """
    P[U_i <= u_i for i in I, U_j > u_j for j in J], by inclusion-exclusion over margins.

    Args:
        model (CopulaModel): Model of dimension d
        alpha (Direction): Direction of dimension d
        u (array-like): Point or m x d points in the unit cube

    Returns:
        float or numpy.ndarray: The orthant probability
    """
    _check_dimensions(model, alpha)
    points = np.asarray(u, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    part = partition_from_direction(alpha)
    total = np.zeros(points.shape[0])
    for subset in part.subsets_of_positives():
        support = part.union_with(subset)
        if support:
            term = model.margin(support).cdf(points[:, list(support)])
        else:
            term = np.ones(points.shape[0])
        total += (-1) ** len(subset) * term
    return float(total[0]) if single else total


def directional_gap(model, alpha, u):
    """Orthant probability minus the product of the marginal orthant probabilities (Q_alpha)."""
    points = np.asarray(u, dtype=float)
    negative = np.array([s == -1 for s in alpha.signs])
    independent = np.prod(np.where(negative, points, 1.0 - points), axis=-1)
    return orthant_probability(model, alpha, points) - independent


def directional_rho(model, alpha, cfg=None, route="auto"):
    """
    Population coefficient by the cheapest exact route available.

    ``auto`` uses the closed forms for the product, comonotone and FGM
    families, the margin decomposition with quadrature for other models
    when the dimension allows, and the Monte Carlo definition otherwise.

    Args:
        model (CopulaModel): Model of dimension d
        alpha (Direction): Direction of dimension d
        cfg (IntegratorConfig): Integration settings
        route (str): ``auto``, ``closed_form``, ``decomposition`` or ``definition``

    Returns:
        DirectionalRho: Value with method tag and model metadata
    """
    cfg = _config(cfg)
    _check_dimensions(model, alpha)
    if route == "auto":
        closed = _closed_form(model, alpha)
        if closed is not None:
            estimate = CoefficientEstimate(float(closed), Method.CLOSED_FORM)
        elif cfg.uses_quadrature(model.d):
            estimate = rho_directional_decomposition(model, alpha, cfg)
        else:
            estimate = rho_directional_definition(model, alpha, cfg)
    elif route == "closed_form":
        closed = _closed_form(model, alpha)
        if closed is None:
            raise DomainError(f"no closed form for {model.spec}")
        estimate = CoefficientEstimate(float(closed), Method.CLOSED_FORM)
    elif route == "decomposition":
        estimate = rho_directional_decomposition(model, alpha, cfg)
    elif route == "definition":
        estimate = rho_directional_definition(model, alpha, cfg)
    else:
        raise DomainError(f"unknown route {route!r}")
    return DirectionalRho(alpha, estimate, model.family, dict(model.parameters))


def _closed_form(model, alpha):
    if isinstance(model, ProductCopula):
        return Fraction(0)
    if isinstance(model, ClaytonCopula) and model.is_product:
        return Fraction(0)
    if isinstance(model, ComonotoneCopula):
        return closed_form_mn(alpha)
    if isinstance(model, FgmCopula):
        return closed_form_fgm(alpha, model.lam)
    if isinstance(model, SurvivalCopula):
        # the survival copula swaps alpha and -alpha
        return _closed_form(model.base, -alpha)
    return None
