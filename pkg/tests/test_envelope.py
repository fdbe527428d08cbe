import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.duality import (
    GridFunction,
    convex_envelope,
    envelope_as_supremum_check,
    envelope_values,
    is_convex_bidual,
    lower_hull_values,
)
from src.errors import InfeasibleError, ShapeError, UnsupportedDimensionError
from src.measures import Axis, DiscreteMeasure


@pytest.fixture
def tent():
    return GridFunction([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])


def random_function(rng, size):
    points = np.sort(rng.choice(np.arange(-20, 21), size=size, replace=False)).astype(float) / 4
    return GridFunction(points, rng.uniform(-2.0, 2.0, size))


def test_tent_is_not_convex(tent):
    result = is_convex_bidual(tent)
    assert not result
    spread = result.violating_spread
    assert spread["index"] == 1
    assert spread["violation"] == pytest.approx(1.0, abs=1e-9)
    assert sorted(j for j, _ in spread["weights"]) == [0, 2]
    assert result.worst == pytest.approx(1.0, abs=1e-9)


def test_tent_envelope_vanishes(tent):
    np.testing.assert_allclose(envelope_values(tent), [0.0, 0.0, 0.0], atol=1e-9)
    at_half = convex_envelope(tent, DiscreteMeasure([0.5], [1.0], Axis.X))
    assert at_half == pytest.approx(0.0, abs=1e-9)


def test_convex_function_passes():
    phi = GridFunction([-2.0, -1.0, 0.0, 1.0, 3.0], [4.0, 1.0, 0.0, 1.0, 9.0])
    result = is_convex_bidual(phi)
    assert result.convex
    assert result.spreads == []


def test_convexity_in_two_dimensions():
    square = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0], [0.0, 0.0]]
    values = [float(np.dot(p, p)) for p in square]
    assert is_convex_bidual(GridFunction(square, values)).convex
    values[-1] = 5.0
    result = is_convex_bidual(GridFunction(square, values))
    assert not result.convex
    assert result.violating_spread["index"] == 4


def test_signed_measures_split_into_parts(tent):
    alpha = DiscreteMeasure([0.0, 0.5, 1.0], [1.0, -1.0, 0.5], Axis.X, signed=True)
    expected = (convex_envelope(tent, alpha.positive_part) - convex_envelope(tent, alpha.negative_part))
    assert convex_envelope(tent, alpha) == pytest.approx(expected, abs=1e-12)


def test_measure_outside_the_hull_is_infeasible(tent):
    with pytest.raises(InfeasibleError):
        convex_envelope(tent, DiscreteMeasure([2.0], [1.0], Axis.X))


def test_dimension_mismatch(tent):
    with pytest.raises(ShapeError):
        convex_envelope(tent, DiscreteMeasure([[0.0, 0.0]], [1.0], Axis.X))


def test_lower_hull_oracle():
    hull = lower_hull_values([0.0, 1.0, 2.0, 3.0], [0.0, 3.0, -1.0, 0.0], at=[-1.0, 1.0, 2.5, 4.0])
    assert np.isnan(hull[0]) and np.isnan(hull[-1])
    assert hull[1] == pytest.approx(-0.5)
    assert hull[2] == pytest.approx(-0.5)


def test_supremum_check_on_the_tent(tent):
    check = envelope_as_supremum_check(tent)
    assert check
    assert check.dominated and check.matches_oracle and check.idempotent
    assert check.to_dict()["passed"] is True


def test_supremum_check_needs_one_dimension():
    phi = GridFunction([[0.0, 0.0], [1.0, 0.0]], [0.0, 1.0])
    with pytest.raises(UnsupportedDimensionError):
        envelope_as_supremum_check(phi)


@pytest.mark.slow
def test_envelope_matches_lower_hull(rng):
    for _ in range(100):
        phi = random_function(rng, int(rng.integers(2, 13)))
        env = envelope_values(phi)
        hull = lower_hull_values(phi.points[:, 0], phi.values)
        assert np.abs(env - hull).max() <= 1e-9 * max(1.0, np.abs(phi.values).max())
        assert np.all(env <= phi.values + 1e-10)


@given(seed=st.integers(0, 2**32 - 1), size=st.integers(2, 40))
def test_envelope_matches_lower_hull_on_larger_grids(seed, size):
    rng = np.random.default_rng(seed)
    phi = random_function(rng, size)
    at = rng.uniform(phi.points[0, 0], phi.points[-1, 0], 3)
    env = envelope_values(phi, at=at)
    hull = lower_hull_values(phi.points[:, 0], phi.values, at=at)
    assert np.abs(env - hull).max() <= 1e-9 * max(1.0, np.abs(phi.values).max())


@pytest.mark.slow
def test_envelope_is_additive_over_splits(rng):
    for _ in range(50):
        phi = random_function(rng, int(rng.integers(2, 8)))
        inside = np.sort(rng.uniform(phi.points[0, 0], phi.points[-1, 0], 3))
        w = rng.uniform(0.1, 1.0, 3)
        share = rng.uniform(0.0, 1.0, 3)
        whole = convex_envelope(phi, DiscreteMeasure(inside, w, Axis.X))
        first = convex_envelope(phi, DiscreteMeasure(inside, w * share, Axis.X))
        second = convex_envelope(phi, DiscreteMeasure(inside, w * (1 - share), Axis.X))
        assert whole == pytest.approx(first + second, abs=1e-9)
