import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.config import config_value, load_config, settings
from src.errors import ShapeError
from src.lp import LinearProgram, LpBuilder, LpStatus, Relation, Sense, get_solver, solve, verify
from src.lp.simplex import SimplexSolver
from src.lp.verify import dual_objective, dual_residual, farkas_margin, primal_residual, ray_margin


def production_lp() -> LinearProgram:
    """max x + y with x + 2y <= 4, 3x + y <= 6; optimum 2.8 at (1.6, 1.2)."""
    builder = LpBuilder(Sense.MAX)
    v = builder.add_variables(2, cost=[1.0, 1.0])
    builder.add_row(v, [1.0, 2.0], Relation.LE, 4.0)
    builder.add_row(v, [3.0, 1.0], Relation.LE, 6.0)
    return builder.build()


def transport_lp(cost: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> LinearProgram:
    m, n = cost.shape
    builder = LpBuilder(Sense.MIN)
    eta = builder.add_variables(m * n, cost=cost.reshape(-1)).reshape(m, n)
    for i in range(m):
        builder.add_row(eta[i], np.ones(n), Relation.EQ, mu[i])
    for j in range(n):
        builder.add_row(eta[:, j], np.ones(m), Relation.EQ, nu[j])
    return builder.build()


@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_optimal_solution_and_duals(backend):
    lp = production_lp()
    sol = solve(lp, backend)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(2.8, abs=1e-9)
    np.testing.assert_allclose(sol.x, [1.6, 1.2], atol=1e-9)
    report = verify(lp, sol)
    assert report.primal <= 1e-9
    assert report.dual <= 1e-9
    assert report.gap <= 1e-9
    assert dual_objective(lp, sol.duals) == pytest.approx(2.8, abs=1e-9)


def test_free_variables_and_equalities():
    # min |x - 3| written with a free x and an epigraph variable
    builder = LpBuilder(Sense.MIN)
    x = int(builder.add_variables(1, lower=-np.inf)[0])
    t = int(builder.add_variables(1, lower=0.0, cost=1.0)[0])
    builder.add_row([t, x], [1.0, -1.0], Relation.GE, -3.0)
    builder.add_row([t, x], [1.0, 1.0], Relation.GE, 3.0)
    builder.add_row([x], [1.0], Relation.EQ, 5.0)
    sol = solve(builder.build(), "simplex")
    assert sol.is_optimal
    assert sol.objective == pytest.approx(2.0, abs=1e-9)
    assert sol.x[x] == pytest.approx(5.0, abs=1e-9)


def test_infeasible_program_has_farkas_certificate():
    builder = LpBuilder(Sense.MIN)
    v = builder.add_variables(2, cost=[1.0, 1.0])
    builder.add_row(v, [1.0, 1.0], Relation.GE, 2.0)
    builder.add_row(v, [1.0, 1.0], Relation.LE, 1.0)
    lp = builder.build()
    sol = solve(lp, "simplex")
    assert sol.status is LpStatus.INFEASIBLE
    assert sol.certificate is not None
    assert farkas_margin(lp, sol.certificate) > 0


def test_unbounded_program_has_improving_ray():
    builder = LpBuilder(Sense.MAX)
    v = builder.add_variables(2, cost=[1.0, 0.0])
    builder.add_row(v, [1.0, -1.0], Relation.LE, 1.0)
    lp = builder.build()
    sol = solve(lp, "simplex")
    assert sol.status is LpStatus.UNBOUNDED
    assert ray_margin(lp, sol.certificate) > 0


def test_highs_reports_infeasibility_without_certificate():
    builder = LpBuilder(Sense.MIN)
    v = builder.add_variables(1)
    builder.add_row(v, [1.0], Relation.LE, -1.0)
    sol = solve(builder.build(), "highs")
    assert sol.status is LpStatus.INFEASIBLE
    assert sol.certificate is None


def test_residuals_catch_tampered_solutions():
    lp = production_lp()
    sol = solve(lp, "simplex")
    assert primal_residual(lp, sol.x + np.array([1.0, 0.0])) > 0.1
    assert dual_residual(lp, -sol.duals) > 0.0


def test_with_objective_keeps_the_feasible_set():
    lp = production_lp()
    flipped = lp.with_objective(np.array([1.0, 0.0]), Sense.MIN)
    assert flipped.num_vars == lp.num_vars
    sol = solve(flipped, "simplex")
    assert sol.objective == pytest.approx(0.0, abs=1e-12)


def test_unknown_backend_is_rejected():
    with pytest.raises(ValueError):
        get_solver("glpk")


def test_default_backend_comes_from_settings(monkeypatch):
    monkeypatch.setattr(settings, "solver_backend", "highs")
    assert get_solver().name == "highs"
    monkeypatch.setattr(settings, "solver_backend", "simplex")
    assert get_solver().name == "simplex"
    assert "backend" not in load_config().get("solver", {})


def test_explicit_zero_tolerances_are_kept():
    solver = SimplexSolver(feasibility_tol=0.0, optimality_tol=0.0)
    assert solver.feasibility_tol == 0.0
    assert solver.optimality_tol == 0.0
    assert SimplexSolver().pivot_tol == config_value("solver", "pivot_tol", 1e-11)


def test_inconsistent_bounds_are_a_shape_error():
    builder = LpBuilder(Sense.MIN)
    builder.add_variables(1, lower=1.0, upper=0.0)
    with pytest.raises(ShapeError):
        builder.build()


@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 4), n=st.integers(1, 4))
def test_simplex_matches_highs_on_transport_programs(seed, m, n):
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.1, 1.0, m)
    nu = rng.uniform(0.1, 1.0, n)
    mu, nu = mu / mu.sum(), nu / nu.sum()
    lp = transport_lp(rng.uniform(-1.0, 1.0, (m, n)), mu, nu)
    ours = solve(lp, "simplex")
    oracle = solve(lp, "highs")
    assert ours.is_optimal and oracle.is_optimal
    assert ours.objective == pytest.approx(oracle.objective, abs=1e-8)
    assert ours.residuals.gap <= 1e-9
    assert ours.residuals.complementarity <= 1e-8
