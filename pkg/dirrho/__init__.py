"""
Directional Rho

Multivariate directional rho-coefficients of dependence: exact values for
copula families, rank-based estimators from data, and a seeded simulation
harness.
"""

__version__ = '1.0.0'

from dirrho.copulas import (  # noqa: E402
    ClaytonCopula,
    ComonotoneCopula,
    CopulaModel,
    FgmCopula,
    ProductCopula,
    SurvivalCopula,
    from_spec,
    make_copula,
)
from dirrho.core import (  # noqa: E402
    CoefficientEstimate,
    DataMatrix,
    Direction,
    Method,
    RankMatrix,
    TiePolicy,
    all_directions,
    compute_ranks,
)
from dirrho.errors import ConfigError, DataValidationError, DirRhoError, DomainError, IntegrationError  # noqa: E402
from dirrho.estimators import (  # noqa: E402
    estimate_all_directions,
    rho_hat_decomposed,
    rho_hat_directional,
    rho_hat_minus_subset,
    rho_hat_star3,
)
from dirrho.exact import directional_rho, rho_minus, rho_plus  # noqa: E402
from dirrho.simulation import ReplicationPlan, run_plan  # noqa: E402
