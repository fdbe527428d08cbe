import numpy as np
import pytest

from src.duality import (
    bb_superhedge,
    normalize_ot_decomposition,
    polar_scan_ot,
    quotient_distance,
    solve_ot,
)
from src.duality.common import outer_sum
from src.errors import NormalizationError, PreconditionError, ShapeError
from src.measures import Axis, DiscreteMeasure, SupportGrid
from src.utils.sampling import random_ot_instance


def test_diagonal_indicator_on_uniform_square(uniform_square):
    grid, mu, nu = uniform_square
    report = solve_ot(grid, mu, nu, np.eye(2))
    assert report.primal == pytest.approx(1.0, abs=1e-9)
    assert report.dual == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(report.coupling.dense(), np.eye(2) / 2, atol=1e-9)
    assert report.strong_duality()
    assert report.attained()


def test_zero_payoff_has_zero_value(uniform_square):
    grid, mu, nu = uniform_square
    report = solve_ot(grid, mu, nu, np.zeros(grid.shape))
    assert report.primal == pytest.approx(0.0, abs=1e-9)
    assert report.dual == pytest.approx(0.0, abs=1e-9)


def test_centred_static_payoff_has_zero_value(rng):
    grid, mu, nu, _ = random_ot_instance(rng, 3, 4)
    h = rng.normal(size=grid.m)
    h -= mu.integrate(h)
    g = rng.normal(size=grid.n)
    g -= nu.integrate(g)
    report = solve_ot(grid, mu, nu, outer_sum(h, g))
    # every coupling pays mu(h) + nu(g) = 0
    assert report.primal == pytest.approx(0.0, abs=1e-9)
    assert report.dual == pytest.approx(0.0, abs=1e-9)
    assert report.gap <= 1e-7


def test_report_dict_layout(uniform_square):
    grid, mu, nu = uniform_square
    body = solve_ot(grid, mu, nu, np.eye(2)).to_dict()
    assert set(body) == {"values", "witnesses", "diagnostics"}
    assert {"primal", "dual", "gap"} <= set(body["values"])
    assert {"coupling", "hedge"} <= set(body["witnesses"])
    assert "residuals" in body["diagnostics"]


def test_marginals_must_be_probabilities():
    grid = SupportGrid([0.0, 1.0], [0.0])
    mu = DiscreteMeasure(grid.X, [0.5, 0.6], Axis.X)
    nu = DiscreteMeasure(grid.Y, [1.0], Axis.Y)
    with pytest.raises(NormalizationError):
        solve_ot(grid, mu, nu, np.zeros((2, 1)))


def test_payoff_shape_is_checked(uniform_square):
    grid, mu, nu = uniform_square
    with pytest.raises(ShapeError):
        solve_ot(grid, mu, nu, np.zeros((3, 2)))


@pytest.mark.slow
def test_strong_duality_on_random_instances(rng):
    for _ in range(50):
        m, n = rng.integers(1, 5, size=2)
        grid, mu, nu, payoff = random_ot_instance(rng, int(m), int(n), zero_atoms=int(rng.integers(0, 2)))
        report = solve_ot(grid, mu, nu, payoff)
        assert report.gap <= 1e-7 * (1.0 + abs(report.primal))
        assert report.residuals.domination <= 1e-9
        assert report.residuals.complementarity <= 1e-8
        assert report.residuals.marginal <= 1e-9
        assert report.residuals.centering <= 1e-9


def _random_cone_element(rng, mu, nu):
    b0 = rng.normal(0.0, 2.0, mu.size)
    c0 = rng.normal(0.0, 2.0, nu.size)
    b0 -= mu.integrate(b0)
    c0 -= nu.integrate(c0)
    n0 = -rng.exponential(1.0, (mu.size, nu.size))
    radius = float(np.abs(outer_sum(b0, c0) + n0).max())
    return b0, c0, n0, radius


def test_ot_normalisation_bounds(rng):
    for _ in range(100):
        m, n = rng.integers(1, 6, size=2)
        _, mu, nu, _ = random_ot_instance(rng, int(m), int(n))
        b0, c0, n0, radius = _random_cone_element(rng, mu, nu)
        result = normalize_ot_decomposition(b0, c0, n0, radius, mu, nu)
        assert result.centered_input
        assert result.b_norm <= 3 * radius + 1e-9
        assert result.c_norm <= 3 * radius + 1e-9
        assert result.n.max() <= 1e-9
        assert result.n.min() >= -7 * radius - 1e-9
        assert result.reconstruction_error <= 1e-12 * max(1.0, radius)
        assert abs(mu.integrate(result.b)) <= 1e-9 * radius
        assert abs(nu.integrate(result.c)) <= 1e-9 * radius


def test_ot_normalisation_rejects_elements_outside_the_ball(uniform_square):
    _, mu, nu = uniform_square
    with pytest.raises(PreconditionError):
        normalize_ot_decomposition(np.array([1.0, -1.0]), np.zeros(2), np.zeros((2, 2)), 0.5, mu, nu)
    with pytest.raises(PreconditionError):
        normalize_ot_decomposition(np.zeros(2), np.zeros(2), np.ones((2, 2)) * 0.1, 1.0, mu, nu)


@pytest.mark.slow
def test_polar_cells_are_the_zero_atom_cover(rng):
    for _ in range(50):
        m, n = rng.integers(2, 4, size=2)
        grid, mu, nu, _ = random_ot_instance(rng, int(m), int(n), zero_atoms=1)
        cert = polar_scan_ot(grid, mu, nu)
        assert cert.cover_exact
        expected = {(i, j) for i in range(grid.m) for j in range(grid.n)
                    if mu.weights[i] == 0 or nu.weights[j] == 0}
        assert set(cert.polar_cells) == expected


def test_quasi_sure_superhedge_ignores_polar_cells():
    grid = SupportGrid([0.0, 1.0], [0.0, 1.0])
    mu = DiscreteMeasure(grid.X, [1.0, 0.0], Axis.X)
    nu = DiscreteMeasure(grid.Y, [0.5, 0.5], Axis.Y)
    payoff = np.array([[0.0, 0.0], [100.0, 100.0]])
    hedge, value = bb_superhedge(grid, mu, nu, payoff)
    assert value == pytest.approx(0.0, abs=1e-9)
    assert np.all(hedge.table(grid) >= payoff - 1e-9)
    assert hedge.zeta[1].min() >= 0.0


@pytest.mark.slow
@pytest.mark.parametrize("weighted", [False, True])
def test_quotient_sides_agree(rng, weighted):
    for _ in range(25):
        m, n = rng.integers(1, 4, size=2)
        grid, mu, nu, payoff = random_ot_instance(rng, int(m), int(n))
        result = quotient_distance(grid, mu, nu, payoff, weighted=weighted)
        assert result.agree(1e-7)
        assert abs(mu.integrate(result.hedge.h)) + abs(nu.integrate(result.hedge.g)) <= 1e-9


def test_quotient_of_a_static_payoff_is_zero(uniform_square):
    grid, mu, nu = uniform_square
    payoff = outer_sum(np.array([1.0, -1.0]), np.array([2.0, -2.0]))
    result = quotient_distance(grid, mu, nu, payoff)
    assert result.inf_side == pytest.approx(0.0, abs=1e-9)
    assert result.sup_side == pytest.approx(0.0, abs=1e-9)
