from fractions import Fraction

import numpy as np
import pytest

from src.duality import (
    anchor_grid,
    apply_T,
    gap_sequence,
    normalization_constant,
    normalize_mot_decomposition,
    polar_scan_mot,
    solve_mot,
    touching_points,
    witness_table,
)
from src.errors import ConvexOrderError, PreconditionError, ShapeError
from src.measures import Axis, DiscreteMeasure, SupportGrid
from src.utils.sampling import random_martingale_pair


def test_binary_spread_value_and_normaliser(binary_spread):
    grid, mu, nu = binary_spread
    payoff = np.abs(grid.Y[:, 0][None, :] - grid.X[:, 0][:, None])
    report = solve_mot(grid, mu, nu, payoff)
    assert report.primal == pytest.approx(1.0, abs=1e-9)
    assert report.dual == pytest.approx(1.0, abs=1e-9)
    assert normalization_constant(mu, nu) == pytest.approx(3.0)
    assert report.extras["m_star"] == pytest.approx(3.0)
    assert report.extras["normalized_value"] == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert report.extras["scaling_residual"] <= 1e-9
    assert report.residuals.defect <= 1e-9


def test_reversed_marginals_are_rejected():
    grid = SupportGrid([-1.0, 1.0], [0.0])
    mu = DiscreteMeasure(grid.X, [0.5, 0.5], Axis.X)
    nu = DiscreteMeasure(grid.Y, [1.0], Axis.Y)
    with pytest.raises(ConvexOrderError) as info:
        solve_mot(grid, mu, nu, np.zeros(grid.shape))
    assert info.value.exit_code == 2
    assert info.value.details["violation_point"] == pytest.approx(0.0)


@pytest.mark.slow
def test_strong_duality_on_random_martingale_pairs(rng):
    for _ in range(50):
        grid, mu, nu = random_martingale_pair(rng, int(rng.integers(1, 4)))
        payoff = rng.uniform(-1.0, 1.0, grid.shape)
        report = solve_mot(grid, mu, nu, payoff)
        assert report.gap <= 1e-7 * (1.0 + abs(report.primal))
        assert report.residuals.domination <= 1e-9
        assert report.residuals.complementarity <= 1e-8
        assert report.residuals.defect <= 1e-9
        assert report.extras["scaling_residual"] <= 1e-9


def test_anchor_grid_translates_and_inserts_origin():
    grid = SupportGrid([1.0], [0.0, 2.0])
    mu = DiscreteMeasure(grid.X, [1.0], Axis.X)
    nu = DiscreteMeasure(grid.Y, [0.5, 0.5], Axis.Y)
    anchored = anchor_grid(grid, mu, nu)
    assert anchored.shift[0] == pytest.approx(1.0)
    np.testing.assert_allclose(anchored.grid.X[:, 0], [0.0])
    assert anchored.anchor_x == 0
    # Y = {-1, 1} had no origin, so one is appended with zero mass
    assert anchored.grid.n == 3
    assert anchored.nu.weights[anchored.anchor_y] == 0.0


def _dirac_instance(rng):
    """mu = delta_0 on X inside Y, nu symmetric on Y, random centred statics."""
    radii = np.sort(rng.choice(np.arange(1, 5), size=int(rng.integers(1, 4)), replace=False)).astype(float)
    Y = np.concatenate([-radii[::-1], [0.0], radii])
    extra = rng.choice(Y[Y != 0], size=int(rng.integers(0, 3)), replace=False)
    X = np.sort(np.concatenate([[0.0], extra]))
    grid = SupportGrid(X, Y)
    mu_w = (X == 0).astype(float)
    half = rng.uniform(0.1, 1.0, radii.size)
    nu_w = np.concatenate([half[::-1], [rng.uniform(0.0, 1.0)], half])
    mu = DiscreteMeasure(X, mu_w, Axis.X)
    nu = DiscreteMeasure(Y, nu_w / nu_w.sum(), Axis.Y)

    b0 = rng.normal(0.0, 3.0, grid.m)
    b0[X == 0] = 0.0
    c0 = rng.normal(0.0, 3.0, grid.n)
    c0 -= nu.integrate(c0)
    gamma0 = rng.normal(0.0, 3.0, grid.m)
    return grid, mu, nu, b0, c0, gamma0


def test_mot_normalisation_bounds(rng):
    for _ in range(100):
        grid, mu, nu, b0, c0, gamma0 = _dirac_instance(rng)
        triple = normalize_mot_decomposition(grid, mu, nu, b0, c0, gamma0)
        scale = max(1.0, triple.a_norm)
        assert triple.anchor_in_y and triple.x_in_y
        assert triple.b_norm <= 4 * triple.a_norm + 1e-9 * scale
        assert triple.c_norm <= 2 * triple.a_norm + 1e-9 * scale
        assert triple.bounds_hold
        assert triple.reconstruction_error <= 1e-12 * max(1.0, np.abs(b0).max(), np.abs(c0).max(), np.abs(gamma0).max())
        assert triple.centering <= 1e-9 * scale
        k = int(np.flatnonzero(grid.X[:, 0] == 0)[0])
        assert triple.gamma[k, 0] == pytest.approx(0.0, abs=1e-15)


def _symmetric_weights(rng, size):
    half = rng.uniform(0.1, 1.0, size // 2)
    w = np.concatenate([half, [rng.uniform(0.1, 1.0)], half[::-1]])
    return w / w.sum()


def test_mot_normalisation_away_from_a_dirac(rng):
    pts = [-2.0, -1.0, 0.0, 1.0, 2.0]
    grid = SupportGrid(pts, pts)
    for _ in range(100):
        mu = DiscreteMeasure(grid.X, _symmetric_weights(rng, 5), Axis.X)
        nu = DiscreteMeasure(grid.Y, _symmetric_weights(rng, 5), Axis.Y)
        b0 = rng.normal(0.0, 3.0, grid.m)
        b0 -= mu.integrate(b0)
        c0 = rng.normal(0.0, 3.0, grid.n)
        c0 -= nu.integrate(c0)
        gamma0 = rng.normal(0.0, 3.0, grid.m)
        triple = normalize_mot_decomposition(grid, mu, nu, b0, c0, gamma0)
        scale = max(1.0, triple.a_norm)
        assert triple.anchor_in_y and triple.x_in_y
        assert triple.intermediate_bounds_hold
        assert triple.c2_norm <= 2 * triple.a_norm + 1e-9 * scale
        assert triple.b2_norm <= 4 * triple.a_norm + 1e-9 * scale
        assert triple.reconstruction_error <= 1e-12 * max(1.0, np.abs(b0).max(), np.abs(c0).max(), np.abs(gamma0).max())
        assert triple.centering <= 1e-9 * scale
        assert triple.gamma[2, 0] == pytest.approx(0.0, abs=1e-15)
        assert triple.bounds_hold == (triple.b_norm <= 4 * triple.a_norm + 1e-9
                                      and triple.c_norm <= 2 * triple.a_norm + 1e-9)


def test_mot_normalisation_recentring_can_exceed_the_static_bound():
    pts = [-1.0, 0.0, 1.0]
    grid = SupportGrid(pts, pts)
    mu = DiscreteMeasure(grid.X, [0.25, 0.5, 0.25], Axis.X)
    nu = DiscreteMeasure(grid.Y, [0.4, 0.2, 0.4], Axis.Y)
    triple = normalize_mot_decomposition(grid, mu, nu, [-1.0, 1.0, -1.0], [1.0, -4.0, 1.0], [0.0, 0.0, 0.0])
    assert triple.a_norm == pytest.approx(5.0 / 3.0)
    assert triple.b2_norm == pytest.approx(1.0)
    assert triple.c2_norm == pytest.approx(3.0)
    assert triple.intermediate_bounds_hold
    # recentring by mu(b2) = -1 moves c2 = (2, -3, 2) back to (1, -4, 1)
    np.testing.assert_allclose(triple.c, [1.0, -4.0, 1.0], atol=1e-15)
    assert triple.c_norm == pytest.approx(4.0)
    assert triple.c_norm > 2 * triple.a_norm
    assert not triple.bounds_hold
    assert triple.to_dict()["bounds_hold"] is False
    assert triple.reconstruction_error <= 1e-12


def test_mot_normalisation_of_trading_only_elements():
    pts = [-1.0, 0.0, 1.0]
    grid = SupportGrid(pts, pts)
    mu = DiscreteMeasure(grid.X, [0.0, 1.0, 0.0], Axis.X)
    nu = DiscreteMeasure(grid.Y, [0.5, 0.0, 0.5], Axis.Y)
    triple = normalize_mot_decomposition(grid, mu, nu, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert triple.a_norm == 0.0
    assert triple.bounds_hold
    # a T-only element with a large strategy away from the anchor
    gamma = [5.0, 0.0, -5.0]
    a = apply_T(grid, gamma).values
    triple = normalize_mot_decomposition(grid, mu, nu, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0], gamma)
    assert triple.a_norm == pytest.approx(float(np.max(np.abs(a) / grid.ell)))
    assert triple.to_dict()["b_bound"] == pytest.approx(4 * triple.a_norm)


def test_mot_normalisation_needs_centred_statics(binary_spread):
    grid, mu, nu = binary_spread
    with pytest.raises(PreconditionError):
        normalize_mot_decomposition(grid, mu, nu, [0.0], [1.0, 1.0], [0.0])


def test_mot_normalisation_needs_anchor_on_the_grid():
    grid = SupportGrid([-1.0, 1.0], [-2.0, 0.0, 2.0])
    mu = DiscreteMeasure(grid.X, [0.5, 0.5], Axis.X)
    nu = DiscreteMeasure(grid.Y, [0.25, 0.5, 0.25], Axis.Y)
    with pytest.raises(PreconditionError):
        normalize_mot_decomposition(grid, mu, nu, [0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0])


def test_touching_points_of_the_five_point_pair(five_point_pair):
    _, mu, nu = five_point_pair
    assert touching_points(mu, nu) == [0.0]


def test_witness_table_values(five_point_pair):
    grid, _, _ = five_point_pair
    a = witness_table(grid, 0.0)
    assert a.min() >= 0.0
    assert a[1, 4] == pytest.approx(4.0)
    assert a[3, 0] == pytest.approx(4.0)


def test_polar_rectangles_are_certified(five_point_pair):
    grid, mu, nu = five_point_pair
    cert = polar_scan_mot(grid, mu, nu)
    assert cert.touching_points == [0.0]
    rect = cert.rectangles[0]
    assert rect["certified"]
    charged = {(1, 3), (1, 4), (3, 0), (3, 1)}
    assert charged <= {tuple(c) for c in rect["cells"]}
    for i, j in charged:
        assert cert.cell_values[i, j] <= 1e-10
    assert cert.witness_min >= 0.0
    assert cert.witness_value <= 1e-9
    assert cert.witness[1, 4] == pytest.approx(4.0)


def test_full_scan_finds_rectangle_and_zero_atom_cells(five_point_pair):
    grid, mu, nu = five_point_pair
    cert = polar_scan_mot(grid, mu, nu, full_scan=True)
    assert bool(cert.scanned.all())
    polar = set(cert.polar_cells)
    assert {(1, 3), (1, 4), (3, 0), (3, 1)} <= polar
    # rows with no mass are never charged
    assert {(0, j) for j in range(grid.n)} <= polar
    # the spread from -1 to {-2, 0} is charged
    assert (1, 0) not in polar


def test_identical_marginals_charge_only_the_diagonal(rng):
    pts = [-1.0, 0.0, 2.0]
    grid = SupportGrid(pts, pts)
    w = [0.2, 0.5, 0.3]
    mu = DiscreteMeasure(grid.X, w, Axis.X)
    nu = DiscreteMeasure(grid.Y, w, Axis.Y)
    payoff = rng.uniform(-1.0, 1.0, grid.shape)
    report = solve_mot(grid, mu, nu, payoff)
    assert report.primal == pytest.approx(float(np.dot(w, np.diag(payoff))), abs=1e-9)
    assert report.gap <= 1e-7 * (1.0 + abs(report.primal))


def test_identical_marginals_make_every_off_diagonal_cell_polar():
    pts = [-1.0, 0.0, 1.0]
    grid = SupportGrid(pts, pts)
    mu = DiscreteMeasure(grid.X, [0.25, 0.5, 0.25], Axis.X)
    nu = DiscreteMeasure(grid.Y, [0.25, 0.5, 0.25], Axis.Y)
    cert = polar_scan_mot(grid, mu, nu)
    off_diagonal = {(i, j) for i in range(3) for j in range(3) if i != j}
    assert set(cert.polar_cells) == off_diagonal
    assert cert.touching_points == [-0.5, 0.0, 0.5]
    # the rectangle at 0 sits inside the one at -0.5 and is dropped
    assert [r["x0"] for r in cert.rectangles] == [-0.5, 0.5]
    assert {tuple(c) for r in cert.rectangles for c in r["cells"]} == off_diagonal
    assert all(r["certified"] for r in cert.rectangles)


def test_no_touching_points_means_no_polar_cells(binary_spread):
    grid, mu, nu = binary_spread
    cert = polar_scan_mot(grid, mu, nu)
    assert cert.touching_points == []
    assert cert.rectangles == []
    assert cert.polar_cells == []


def test_polar_scan_rejects_unordered_marginals():
    grid = SupportGrid([-1.0, 1.0], [0.0])
    mu = DiscreteMeasure(grid.X, [0.5, 0.5], Axis.X)
    nu = DiscreteMeasure(grid.Y, [1.0], Axis.Y)
    with pytest.raises(ConvexOrderError):
        polar_scan_mot(grid, mu, nu)


def test_gap_sequence_default_row():
    report = gap_sequence(1001, [1, 2, 5], (10.0, 10.0, 10.0))
    first = report.rows[0]
    assert Fraction(report.exact[0]["defect"]) == Fraction(1, 1000)
    assert Fraction(report.exact[0]["payoff_mass"]) == 1
    assert first.payoff_mass == 1.0
    assert first.defect == pytest.approx(1e-3, abs=1e-15)
    assert first.shortfall_bound <= -0.9
    assert list(report.to_frame().columns) == ["n", "shift", "dist_x", "dist_y", "defect",
                                               "payoff_mass", "shortfall_bound"]


def test_gap_shortfall_decreases_with_grid_size():
    bounds = [gap_sequence(n, [1], (10.0, 10.0, 10.0)).rows[0].shortfall_bound for n in (251, 501, 1001, 2001)]
    assert all(a > b for a, b in zip(bounds, bounds[1:]))
    assert bounds[-1] > -1.0


def test_gap_sequence_validates_inputs():
    with pytest.raises(PreconditionError):
        gap_sequence(1, [1], (1.0, 1.0, 1.0))
    with pytest.raises(PreconditionError):
        gap_sequence(10, [10], (1.0, 1.0, 1.0))
    with pytest.raises(ShapeError):
        gap_sequence(10, [1], (1.0, 1.0))
