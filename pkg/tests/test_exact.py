from fractions import Fraction

import numpy as np
import pytest

from dirrho.copulas import ClaytonCopula, ComonotoneCopula, FgmCopula, ProductCopula, SurvivalCopula, survival_reflect
from dirrho.core import Direction, Method, all_directions, normalization_constant
from dirrho.errors import DomainError, IntegrationError
from dirrho.exact import (
    closed_form_fgm,
    closed_form_mn,
    decomposition_terms,
    directional_gap,
    directional_rho,
    fgm_coefficient,
    fgm_pd_order_holds,
    orthant_probability,
    rho_directional_decomposition,
    rho_directional_definition,
    rho_minus,
    rho_plus,
    sum_over_directions,
)
from dirrho.integrate import IntegratorConfig

THETAS = [0.4, 0.6, 1.0, 2.0, 5.0]

# reference Clayton values to four decimals, thetas in THETAS order
CLAYTON_TABLES = {
    "(-1,1,1)": [-0.0726, -0.0969, -0.1338, -0.1906, -0.2684],
    "(-1,-1,1)": [-0.0919, -0.1287, -0.1850, -0.2621, -0.3212],
    "(-1,1,1,-1)": [-0.0664, -0.0876, -0.1176, -0.1583, -0.1966],
}


def test_closed_form_mn_values():
    assert closed_form_mn(Direction((1, 1, 1))) == 1
    assert closed_form_mn(Direction((-1, -1, -1))) == 1
    assert closed_form_mn(Direction((-1, 1, 1))) == Fraction(-1, 3)
    assert closed_form_mn(Direction((1, -1, -1))) == Fraction(-1, 3)
    assert closed_form_mn(Direction((-1, -1, 1, 1))) == Fraction(-7, 33)
    assert closed_form_mn(Direction((-1, 1, 1, 1))) == Fraction(-1, 11)


def test_closed_form_mn_sums_to_zero():
    for d in range(2, 8):
        assert sum(closed_form_mn(a) for a in all_directions(d)) == 0


def test_closed_form_fgm():
    assert fgm_coefficient(3) == Fraction(1, 27)
    assert fgm_coefficient(4) == Fraction(5, 891)
    for alpha in all_directions(4):
        positives = alpha.d - alpha.negative_count
        expected = Fraction(5, 891) * (-1) ** positives
        assert closed_form_fgm(alpha, Fraction(1)) == expected
        assert closed_form_fgm(alpha, 1.0) == pytest.approx(float(expected), abs=1e-16)
    with pytest.raises(DomainError):
        closed_form_fgm(Direction((1, 1)), 1.5)


@pytest.mark.parametrize("d", [3, 4, pytest.param(5, marks=pytest.mark.slow)])
@pytest.mark.parametrize("lam", [-1.0, -0.5, 0.6, 1.0])
def test_fgm_closed_form_matches_decomposition(d, lam):
    model = FgmCopula(lam, d)
    for alpha in all_directions(d):
        estimate = rho_directional_decomposition(model, alpha)
        assert estimate.method is Method.DECOMPOSITION
        assert estimate.value == pytest.approx(closed_form_fgm(alpha, lam), abs=1e-10)


def test_fgm_orthant_gap_factorizes():
    model = FgmCopula(0.6, 3)
    points = np.random.default_rng(5).uniform(0.05, 0.95, size=(10, 3))
    for alpha in all_directions(3):
        positives = 3 - alpha.negative_count
        expected = (-1) ** positives * 0.6 * np.prod(points * (1.0 - points), axis=1)
        np.testing.assert_allclose(directional_gap(model, alpha, points), expected, atol=1e-12)


def test_orthant_probability_partitions_unity():
    model = ClaytonCopula(2.0, 3)
    u = np.array([0.3, 0.6, 0.45])
    total = sum(orthant_probability(model, alpha, u) for alpha in all_directions(3))
    assert total == pytest.approx(1.0, abs=1e-12)
    assert orthant_probability(model, Direction.negative(3), u) == pytest.approx(model.cdf(u), abs=1e-14)


def test_fgm_pd_order():
    for alpha in all_directions(3):
        for lam1, lam2 in [(-1.0, 0.5), (0.5, -1.0), (0.2, 0.2), (-0.3, 0.9)]:
            assert fgm_pd_order_holds(alpha, lam1, lam2)


def test_decomposition_terms_positive_direction():
    terms = dict(decomposition_terms(Direction.positive(4)))
    assert len(terms) == 11
    assert terms[(0, 1)] == Fraction(20, 33)
    assert terms[(0, 1, 2)] == Fraction(-10, 11)
    assert terms[(0, 1, 2, 3)] == 1
    assert decomposition_terms(Direction.negative(3)) == [((0, 1, 2), Fraction(1))]


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_product_and_comonotone_orthant_normalization(d):
    for coefficient in (rho_minus, rho_plus):
        independent = coefficient(ProductCopula(d))
        assert independent.value == pytest.approx(0.0, abs=1e-10)
        assert independent.method is Method.CLOSED_FORM
        comonotone = coefficient(ComonotoneCopula(d))
        assert comonotone.value == pytest.approx(1.0, abs=1e-10)
        assert comonotone.method is Method.CLOSED_FORM
        assert coefficient(SurvivalCopula(ComonotoneCopula(d))).value == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(DomainError):
        rho_minus(ProductCopula(1))


def test_fgm_upper_and_lower_orthant():
    model = FgmCopula(0.6, 3)
    assert rho_minus(model).value == pytest.approx(0.6 / 27, abs=1e-12)
    assert rho_plus(model).value == pytest.approx(-0.6 / 27, abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
@pytest.mark.parametrize("lam", [-1.0, 0.6])
def test_fgm_orthant_coefficients_match_closed_form(d, lam):
    model = FgmCopula(lam, d)
    assert rho_minus(model).value == pytest.approx(float(closed_form_fgm(Direction.negative(d), lam)), abs=1e-12)
    assert rho_plus(model).value == pytest.approx(float(closed_form_fgm(Direction.positive(d), lam)), abs=1e-12)
    assert rho_plus(SurvivalCopula(model)).value == pytest.approx(rho_minus(model).value, abs=1e-12)


def test_clayton_orthant_coefficients_use_quadrature():
    assert rho_minus(ClaytonCopula(1.0, 3)).method is Method.QUADRATURE
    assert rho_plus(ClaytonCopula(0.0, 3)).method is Method.CLOSED_FORM


@pytest.mark.parametrize("table", sorted(CLAYTON_TABLES))
def test_clayton_population_tables(table):
    alpha = Direction.parse(table)
    matches_alpha, matches_reversed = [], []
    for theta, expected in zip(THETAS, CLAYTON_TABLES[table]):
        model = ClaytonCopula(theta, alpha.d)
        matches_alpha.append(abs(directional_rho(model, alpha).value - expected) <= 0.005)
        matches_reversed.append(abs(directional_rho(model, -alpha).value - expected) <= 0.005)
    # one orientation must fit the whole table; it is the alpha orientation
    assert all(matches_alpha) or all(matches_reversed)
    assert all(matches_alpha)


def test_definition_and_decomposition_agree():
    model = ClaytonCopula(2.0, 4)
    for alpha in [Direction((-1, 1, 1, -1)), Direction((1, 1, -1, 1)), Direction.positive(4)]:
        by_definition = rho_directional_definition(model, alpha)
        by_decomposition = rho_directional_decomposition(model, alpha)
        assert by_definition.value == pytest.approx(by_decomposition.value, abs=1e-9)


def test_survival_symmetry():
    base = ClaytonCopula(1.0, 3)
    survival = SurvivalCopula(base)
    for alpha in all_directions(3):
        assert rho_directional_decomposition(survival, alpha).value == pytest.approx(
            rho_directional_decomposition(base, -alpha).value, abs=1e-6)


def test_survival_symmetry_on_reflected_samples():
    model = ClaytonCopula(1.0, 3)
    count = 200_000
    reflected = survival_reflect(model.sample(count, np.random.default_rng(77)))
    c = float(normalization_constant(3))
    for alpha in all_directions(3):
        negative = np.array([s == 1 for s in alpha.signs])
        # orientation products of -alpha on the reflected sample
        products = np.prod(np.where(negative, 1.0 - reflected, reflected), axis=1)
        estimate = c * (products.mean() - 2.0 ** -3)
        std_error = c * products.std(ddof=1) / np.sqrt(count)
        exact = rho_directional_decomposition(model, alpha).value
        assert abs(estimate - exact) <= 3 * std_error, alpha


def test_sum_over_directions_is_zero():
    model = ClaytonCopula(2.0, 3)
    assert abs(sum_over_directions(model)) <= 1e-9
    mc = IntegratorConfig(method="monte_carlo", sample_count=100_000, target_std_error=1.0)
    assert abs(sum_over_directions(model, mc)) <= 1e-10


def test_product_copula_vanishes_everywhere():
    for alpha in all_directions(5):
        result = directional_rho(ProductCopula(5), alpha)
        assert result.value == 0.0
        assert result.estimate.method is Method.CLOSED_FORM


def test_directional_rho_routes():
    model = ClaytonCopula(1.0, 3)
    alpha = Direction((-1, 1, 1))
    auto = directional_rho(model, alpha)
    assert auto.estimate.method is Method.DECOMPOSITION
    assert auto.family == "clayton"
    assert auto.parameters == {"theta": 1.0}
    definition = directional_rho(model, alpha, route="definition")
    assert definition.value == pytest.approx(auto.value, abs=1e-9)
    with pytest.raises(DomainError):
        directional_rho(model, alpha, route="closed_form")
    with pytest.raises(DomainError):
        directional_rho(model, alpha, route="simpson")
    with pytest.raises(DomainError):
        directional_rho(model, Direction((1, 1)))
    survival_fgm = directional_rho(SurvivalCopula(FgmCopula(0.6, 3)), alpha)
    assert survival_fgm.value == pytest.approx(float(closed_form_fgm(-alpha, 0.6)))


def test_monte_carlo_route_matches_quadrature():
    model = ClaytonCopula(1.0, 3)
    alpha = Direction((-1, 1, 1))
    cfg = IntegratorConfig(method="monte_carlo", sample_count=200_000, target_std_error=0.01)
    estimate = rho_directional_definition(model, alpha, cfg)
    assert estimate.method is Method.MONTE_CARLO
    assert estimate.sample_count == 200_000
    assert estimate.converged
    exact = rho_directional_decomposition(model, alpha).value
    assert abs(estimate.value - exact) <= 5 * estimate.std_error


def test_monte_carlo_decomposition_carries_error():
    cfg = IntegratorConfig(method="monte_carlo", sample_count=50_000, target_std_error=1.0)
    estimate = rho_directional_decomposition(ClaytonCopula(1.0, 3), Direction((-1, 1, 1)), cfg)
    assert estimate.method is Method.MONTE_CARLO
    assert estimate.std_error > 0


def test_strict_monte_carlo_failure():
    cfg = IntegratorConfig(method="monte_carlo", sample_count=10_000, target_std_error=1e-6, strict=True)
    with pytest.raises(IntegrationError):
        rho_minus(ClaytonCopula(1.0, 3), cfg)


@pytest.mark.slow
@pytest.mark.parametrize("d", [3, 4])
def test_comonotone_closed_form_against_monte_carlo(d):
    cfg = IntegratorConfig(method="monte_carlo", sample_count=1_000_000, target_std_error=1.0)
    model = ComonotoneCopula(d)
    for alpha in all_directions(d):
        estimate = rho_directional_definition(model, alpha, cfg)
        assert abs(estimate.value - float(closed_form_mn(alpha))) <= 3 * estimate.std_error + 1e-12


@pytest.mark.slow
def test_clayton_quadrature_against_large_monte_carlo():
    model = ClaytonCopula(2.0, 4)
    alpha = Direction((-1, 1, 1, -1))
    cfg = IntegratorConfig(method="monte_carlo", sample_count=2_000_000, target_std_error=1.0)
    estimate = rho_directional_definition(model, alpha, cfg)
    assert abs(estimate.value - rho_directional_decomposition(model, alpha).value) <= 4 * estimate.std_error
