"""Independent residual computation for LP solutions.

Sign convention for row multipliers, stated for minimisation (a maximisation
program uses the same rules on ``-c`` and ``-y``):

* ``>=`` rows carry ``y >= 0``, ``<=`` rows carry ``y <= 0``, ``=`` rows are free;
* reduced costs ``d = c - A^T y`` must be ``>= 0`` on variables held at a finite
  lower bound only, ``<= 0`` at a finite upper bound only, ``0`` when free;
* the dual objective is ``b^T y + sum_j d_j * (l_j if d_j > 0 else u_j)``.

A Farkas certificate ``y`` obeys the same row signs and proves infeasibility
when ``b^T y - sup_{l<=x<=u} (A^T y)^T x > 0``.
"""

import numpy as np

from src.lp.program import LinearProgram, LpSolution, LpStatus, Relation, ResidualReport


def _row_masks(lp: LinearProgram):
    rel = np.array([r.value for r in lp.relations], dtype=object)
    return rel == Relation.LE.value, rel == Relation.GE.value, rel == Relation.EQ.value


def _box_support(coef: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Per-variable ``sup_{l<=x<=u} coef * x`` (may be +inf)."""
    with np.errstate(invalid="ignore"):
        hi = np.where(coef > 0, coef * upper, np.where(coef < 0, coef * lower, 0.0))
    return np.nan_to_num(hi, nan=0.0, posinf=np.inf, neginf=-np.inf)


def _bound_terms(d: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        terms = np.where(d > 0, d * lower, np.where(d < 0, d * upper, 0.0))
    return terms


def primal_residual(lp: LinearProgram, x: np.ndarray) -> float:
    le, ge, eq = _row_masks(lp)
    ax = lp.matrix @ x
    viol = np.zeros(lp.num_rows)
    viol[le] = np.maximum(ax[le] - lp.rhs[le], 0.0)
    viol[ge] = np.maximum(lp.rhs[ge] - ax[ge], 0.0)
    viol[eq] = np.abs(ax[eq] - lp.rhs[eq])
    bound = np.maximum(np.maximum(lp.lower - x, 0.0), np.maximum(x - lp.upper, 0.0))
    worst = max(viol.max(initial=0.0), bound.max(initial=0.0))
    scale = max(1.0, float(np.abs(lp.rhs).max(initial=0.0)))
    return float(worst / scale)


def _min_form(lp: LinearProgram, y: np.ndarray):
    sigma = lp.sense.sign
    c = sigma * lp.objective
    ymin = sigma * y
    return c, ymin, c - lp.matrix.T @ ymin


def dual_residual(lp: LinearProgram, y: np.ndarray) -> float:
    le, ge, _ = _row_masks(lp)
    c, ymin, d = _min_form(lp, y)
    sign_viol = np.zeros(lp.num_rows)
    sign_viol[le] = np.maximum(ymin[le], 0.0)
    sign_viol[ge] = np.maximum(-ymin[ge], 0.0)
    has_lo = np.isfinite(lp.lower)
    has_up = np.isfinite(lp.upper)
    red_viol = np.zeros(lp.num_vars)
    # d >= 0 is needed when the upper bound is infinite, d <= 0 when the lower bound is
    red_viol = np.where(~has_up, np.maximum(-d, 0.0), red_viol)
    red_viol = np.maximum(red_viol, np.where(~has_lo, np.maximum(d, 0.0), 0.0))
    scale = max(1.0, float(np.abs(c).max(initial=0.0)))
    worst = max(sign_viol.max(initial=0.0), red_viol.max(initial=0.0))
    return float(worst / scale)


def dual_objective(lp: LinearProgram, y: np.ndarray) -> float:
    _, ymin, d = _min_form(lp, y)
    terms = _bound_terms(d, lp.lower, lp.upper)
    terms = np.where(np.isfinite(terms), terms, 0.0)
    return float(lp.sense.sign * (lp.rhs @ ymin + terms.sum()))


def complementarity_residual(lp: LinearProgram, x: np.ndarray, y: np.ndarray) -> float:
    _, ymin, d = _min_form(lp, y)
    eq = _row_masks(lp)[2]
    slack = lp.matrix @ x - lp.rhs
    rows = np.where(eq, 0.0, np.abs(ymin * slack))
    with np.errstate(invalid="ignore"):
        at_lo = np.where(d > 0, np.abs(d * (x - lp.lower)), 0.0)
        at_up = np.where(d < 0, np.abs(d * (lp.upper - x)), 0.0)
    cols = np.nan_to_num(at_lo, nan=0.0, posinf=0.0) + np.nan_to_num(at_up, nan=0.0, posinf=0.0)
    value = abs(lp.value(x))
    return float(max(rows.max(initial=0.0), cols.max(initial=0.0)) / max(1.0, value))


def farkas_margin(lp: LinearProgram, y: np.ndarray) -> float:
    """Normalised infeasibility margin; positive means ``y`` proves infeasibility."""
    le, ge, _ = _row_masks(lp)
    scale = float(np.abs(y).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    y = y / scale
    if np.any(y[le] > 1e-9) or np.any(y[ge] < -1e-9):
        return -np.inf
    coef = lp.matrix.T @ y
    support = _box_support(coef, lp.lower, lp.upper)
    # tiny positive coefficients against an infinite bound are round-off
    support = np.where(np.isinf(support) & (np.abs(coef) <= 1e-9), 0.0, support)
    return float(lp.rhs @ y - support.sum())


def ray_margin(lp: LinearProgram, ray: np.ndarray) -> float:
    """Objective improvement per unit step along ``ray``; negative when the ray is not feasible."""
    le, ge, eq = _row_masks(lp)
    ar = lp.matrix @ ray
    tol = 1e-9 * max(1.0, float(np.abs(ray).max(initial=0.0)))
    feasible = (np.all(ar[le] <= tol) and np.all(ar[ge] >= -tol) and np.all(np.abs(ar[eq]) <= tol)
                and np.all((ray >= -tol) | ~np.isfinite(lp.lower))
                and np.all((ray <= tol) | ~np.isfinite(lp.upper)))
    if not feasible:
        return -np.inf
    return float(-lp.sense.sign * (lp.objective @ ray))


def verify(lp: LinearProgram, sol: LpSolution) -> ResidualReport:
    """Recompute every residual of ``sol`` from the program alone."""
    if sol.status is LpStatus.INFEASIBLE:
        margin = farkas_margin(lp, sol.certificate) if sol.certificate is not None else None
        return ResidualReport(certificate=margin)
    if sol.status is LpStatus.UNBOUNDED:
        margin = ray_margin(lp, sol.certificate) if sol.certificate is not None else None
        return ResidualReport(certificate=margin)
    primal = primal_residual(lp, sol.x)
    if sol.duals is None:
        return ResidualReport(primal=primal)
    value = lp.value(sol.x)
    gap = abs(value - dual_objective(lp, sol.duals)) / (1.0 + abs(value))
    return ResidualReport(
        primal=primal,
        dual=dual_residual(lp, sol.duals),
        complementarity=complementarity_residual(lp, sol.x, sol.duals),
        gap=gap,
    )
