"""Martingale optimal transport: weighted-norm duality, normalisation and polar structure."""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from src.config import config_value
from src.duality.common import (
    DualityReport,
    PolarCertificate,
    TableLike,
    as_table,
    assemble_report,
    outer_sum,
    require_marginals,
    require_optimal,
    trading_table,
)
from src.duality.programs import CouplingProgram, HedgeProgram
from src.duality.transport import scan_cells
from src.errors import ConvexOrderError, PreconditionError, ShapeError, UnsupportedDimensionError
from src.lp import Sense, solve
from src.measures import (
    DiscreteMeasure,
    SupportGrid,
    check_convex_order_lp,
    check_convex_order_potential,
    ell,
    potentials,
)

logger = logging.getLogger(__name__)


def normalization_constant(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """``m* = mu(1 + |x|) + nu(1 + |y|)``, the mass every admissible coupling gives ``l``."""
    return mu.weighted_mass + nu.weighted_mass


def _require_order(mu: DiscreteMeasure, nu: DiscreteMeasure, solver=None) -> None:
    order = check_convex_order_lp(mu, nu, solver)
    if order.ordered:
        return
    details: Dict[str, Any] = {"barycenter_gap": order.barycenter_gap,
                               "certificate": None if order.certificate is None
                               else order.certificate.tolist()}
    if mu.dim == 1:
        witness = check_convex_order_potential(mu, nu)
        details.update(violation_point=witness.violation_point, violation=witness.violation)
    raise ConvexOrderError("marginals are not in convex order", details)


def solve_mot(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure, payoff: TableLike,
              solver=None) -> DualityReport:
    """Martingale transport primal and ``c + h(+)g + T(gamma) >= f`` dual.

    Also solves the program normalised by ``eta(l) = 1`` and checks that the
    two values differ by the factor ``m*``.
    """
    require_marginals(grid, mu, nu)
    f = as_table(payoff, grid)
    _require_order(mu, nu, solver)

    primal = CouplingProgram(grid, Sense.MAX).objective(f)
    primal.x_marginal(mu.weights).y_marginal(nu.weights).martingale()
    psol = require_optimal(solve(primal.build(), solver), "MOT primal")

    dual = HedgeProgram(grid, dynamic=True).dominate(f).center(mu.weights, nu.weights)
    dsol = require_optimal(solve(dual.build(), solver), "MOT dual")

    scaled = CouplingProgram(grid, Sense.MAX).objective(f)
    scaled.add_scale()
    scaled.x_marginal(mu.weights, scaled=True).y_marginal(nu.weights, scaled=True)
    scaled.martingale().moment(grid.ell, rhs=1.0)
    ssol = require_optimal(solve(scaled.build(), solver), "normalised MOT primal")

    m_star = normalization_constant(mu, nu)
    primal_value = float(psol.objective)
    scaling_residual = abs(primal_value - m_star * ssol.objective) / max(1.0, abs(primal_value))
    return assemble_report("mot", grid, mu, nu, f, psol, primal.coupling(psol), dsol, dual.hedge(dsol),
                           extras={"m_star": m_star, "normalized_value": float(ssol.objective),
                                   "scaling_residual": scaling_residual})


@dataclass
class AnchoredProblem:
    grid: SupportGrid
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    anchor_x: int
    anchor_y: int
    shift: np.ndarray


def _find_or_insert_origin(points: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    hits = np.flatnonzero(np.abs(points).max(axis=1) <= 1e-12)
    if hits.size:
        return points, weights, int(hits[0])
    return (np.vstack([points, np.zeros((1, points.shape[1]))]), np.append(weights, 0.0),
            points.shape[0])


def anchor_grid(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure) -> AnchoredProblem:
    """Translate so the common barycenter is the origin, adding a zero-mass origin if missing."""
    grid.check_measures(mu, nu)
    tol = config_value("tolerances", "barycenter", 1e-9)
    if np.abs(mu.barycenter - nu.barycenter).max() > tol:
        raise PreconditionError("marginals have different barycenters",
                                {"mu": mu.barycenter.tolist(), "nu": nu.barycenter.tolist()})
    shift = mu.barycenter
    X, wx, ax = _find_or_insert_origin(grid.X - shift, mu.weights)
    Y, wy, ay = _find_or_insert_origin(grid.Y - shift, nu.weights)
    anchored = SupportGrid(X, Y)
    return AnchoredProblem(grid=anchored, mu=DiscreteMeasure(X, wx), nu=DiscreteMeasure(Y, wy, nu.axis),
                           anchor_x=ax, anchor_y=ay, shift=shift)


@dataclass
class MotDualTriple:
    b: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    a_norm: float
    b_norm: float
    c_norm: float
    b2_norm: float
    c2_norm: float
    centering: float
    reconstruction_error: float
    anchor_in_y: bool
    x_in_y: bool

    @property
    def bounds_hold(self) -> bool:
        tol = 1e-9
        return self.b_norm <= 4 * self.a_norm + tol and self.c_norm <= 2 * self.a_norm + tol

    @property
    def intermediate_bounds_hold(self) -> bool:
        tol = 1e-9
        ok = True
        if self.anchor_in_y:
            ok = ok and self.c2_norm <= 2 * self.a_norm + tol
            if self.x_in_y:
                ok = ok and self.b2_norm <= 4 * self.a_norm + tol
        return ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "b": self.b.tolist(), "c": self.c.tolist(), "gamma": self.gamma.tolist(),
            "a_norm": self.a_norm, "b_norm": self.b_norm, "c_norm": self.c_norm,
            "b_bound": 4 * self.a_norm, "c_bound": 2 * self.a_norm,
            "b2_norm": self.b2_norm, "c2_norm": self.c2_norm,
            "centering": self.centering, "reconstruction_error": self.reconstruction_error,
            "anchor_in_y": self.anchor_in_y, "x_in_y": self.x_in_y,
            "bounds_hold": self.bounds_hold, "intermediate_bounds_hold": self.intermediate_bounds_hold,
        }


def _contains(points: np.ndarray, p: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.any(np.abs(points - p[None, :]).max(axis=1) <= tol))


def normalize_mot_decomposition(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure,
                                b0, c0, gamma0, anchor=None) -> MotDualTriple:
    """Rewrite ``a = b0(+)c0 + T(gamma0)`` with a strategy vanishing at the anchor.

    Three recentrings: move ``gamma0(x*)`` into the linear statics, pin
    ``b(x*) = 0``, then recentre by ``mu`` and ``nu``. Norms are weighted by
    ``1 + |x - x*|``, i.e. measured from the anchor.
    """
    grid.check_measures(mu, nu)
    bary_tol = config_value("tolerances", "barycenter", 1e-9)
    if np.abs(mu.barycenter - nu.barycenter).max() > bary_tol:
        raise PreconditionError("marginals have different barycenters",
                                {"mu": mu.barycenter.tolist(), "nu": nu.barycenter.tolist()})
    x_star = mu.barycenter if anchor is None else np.asarray(anchor, dtype=float).reshape(grid.dim)
    if np.abs(x_star - mu.barycenter).max() > bary_tol:
        raise PreconditionError("anchor is not the common barycenter",
                                {"anchor": x_star.tolist(), "barycenter": mu.barycenter.tolist()})
    hits = np.flatnonzero(np.abs(grid.X - x_star[None, :]).max(axis=1) <= bary_tol)
    if hits.size == 0:
        raise PreconditionError("anchor is not a point of the X grid", {"anchor": x_star.tolist()})
    k = int(hits[0])
    x_star = grid.X[k]

    b0 = np.asarray(b0, dtype=float).reshape(grid.m)
    c0 = np.asarray(c0, dtype=float).reshape(grid.n)
    g0 = np.asarray(gamma0, dtype=float).reshape(grid.m, grid.dim)
    scale = max(1.0, float(np.abs(b0).max()), float(np.abs(c0).max()))
    if abs(mu.integrate(b0)) > 1e-9 * scale or abs(nu.integrate(c0)) > 1e-9 * scale:
        raise PreconditionError("statics must be centred",
                                {"mu_b": mu.integrate(b0), "nu_c": nu.integrate(c0)})

    xs = grid.X - x_star
    ys = grid.Y - x_star
    a = outer_sum(b0, c0) + trading_table(grid, g0)

    g_star = g0[k]
    gamma1 = g0 - g_star[None, :]
    b1 = b0 + xs @ g_star
    c1 = c0 - ys @ g_star
    b2 = b1 - b1[k]
    c2 = c1 + b1[k]
    mean_b2 = mu.integrate(b2)
    b3 = b2 - mean_b2
    c3 = c2 + mean_b2

    ell_x, ell_y = ell(xs), ell(ys)
    unit = ell_x[:, None] + ell_y[None, :]
    recon = outer_sum(b3, c3) + trading_table(grid, gamma1)
    return MotDualTriple(
        b=b3, c=c3, gamma=gamma1,
        a_norm=float((np.abs(a) / unit).max()),
        b_norm=float((np.abs(b3) / ell_x).max()),
        c_norm=float((np.abs(c3) / ell_y).max()),
        b2_norm=float((np.abs(b2) / ell_x).max()),
        c2_norm=float((np.abs(c2) / ell_y).max()),
        centering=float(abs(mu.integrate(b3)) + abs(nu.integrate(c3))),
        reconstruction_error=float(np.abs(recon - a).max()),
        anchor_in_y=_contains(grid.Y, x_star),
        x_in_y=all(_contains(grid.Y, x) for x in grid.X),
    )


def witness_table(grid: SupportGrid, x0: float) -> np.ndarray:
    """``|y - x0| - |x - x0| - sign(x - x0)(y - x)``: nonnegative, vanishing under every martingale coupling."""
    x = grid.X[:, 0][:, None]
    y = grid.Y[:, 0][None, :]
    return np.abs(y - x0) - np.abs(x - x0) - np.sign(x - x0) * (y - x)


def touching_points(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: Optional[float] = None) -> List[float]:
    """Points strictly inside the support of ``nu`` where ``u_mu = u_nu``.

    Midpoints between atoms are candidates too: touching on a whole gap
    separates the two atoms bounding it, a cut no atom itself provides.
    """
    tol = config_value("tolerances", "polar_cell", 1e-10) if tol is None else tol
    atoms = np.unique(np.concatenate([mu.points[mu.support, 0], nu.points[nu.support, 0]]))
    candidates = np.unique(np.concatenate([atoms, 0.5 * (atoms[1:] + atoms[:-1])]))
    lo, hi = nu.points[nu.support, 0].min(), nu.points[nu.support, 0].max()
    inside = candidates[(candidates > lo) & (candidates < hi)]
    gap = np.abs(potentials(mu, inside) - potentials(nu, inside))
    return [float(t) for t in inside[gap <= tol]]


def polar_scan_mot(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure,
                   full_scan: bool = False, solver=None) -> PolarCertificate:
    """Certify the cross rectangles at every touching point of the potentials."""
    if grid.dim != 1:
        raise UnsupportedDimensionError("potential-based polar scan needs a 1D grid", {"dim": grid.dim})
    require_marginals(grid, mu, nu)
    order = check_convex_order_potential(mu, nu)
    if not order.ordered:
        raise ConvexOrderError("marginals are not in convex order", order.to_dict())

    tol = config_value("tolerances", "polar_cell", 1e-10)
    x = grid.X[:, 0]
    y = grid.Y[:, 0]
    points = touching_points(mu, nu)
    program = CouplingProgram(grid, Sense.MAX).x_marginal(mu.weights).y_marginal(nu.weights).martingale()
    base = program.build()

    rect_cells: Dict[float, List[Tuple[int, int]]] = {}
    for x0 in points:
        cells = [(i, j) for i in range(grid.m) for j in range(grid.n)
                 if (x[i] < x0 < y[j]) or (y[j] < x0 < x[i])]
        # a rectangle nested in another one certifies nothing new
        if any(set(cells) <= set(kept) for kept in rect_cells.values()):
            continue
        rect_cells = {p: c for p, c in rect_cells.items() if not set(c) < set(cells)}
        rect_cells[x0] = cells
    if full_scan:
        targets = [(i, j) for i in range(grid.m) for j in range(grid.n)]
    else:
        targets = sorted({c for cells in rect_cells.values() for c in cells})
    values = scan_cells(base, grid, targets, solver, desc="polar rectangles")

    cert = PolarCertificate(mode="mot", cell_values=values, tolerance=tol, touching_points=points)
    for x0 in rect_cells:
        a = witness_table(grid, x0)
        wsol = require_optimal(solve(base.with_objective(a.reshape(-1), Sense.MAX), solver),
                               "witness pairing")
        cells = rect_cells[x0]
        cert.rectangles.append({
            "x0": x0,
            "cells": [list(c) for c in cells],
            "certified": bool(all(values[i, j] <= tol for i, j in cells)),
            "witness_min": float(a.min()),
            "witness_value": float(wsol.objective),
        })
        if cert.witness is None:
            cert.witness = a
            cert.witness_min = float(a.min())
            cert.witness_value = float(wsol.objective)
    return cert


@dataclass
class GapRow:
    shift: int
    dist_x: float
    dist_y: float
    defect: float
    payoff_mass: float
    shortfall_bound: float


@dataclass
class GapSequenceReport:
    n: int
    hedge_norms: Tuple[float, float, float]
    rows: List[GapRow] = field(default_factory=list)
    exact: List[Dict[str, Any]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([vars(r) for r in self.rows],
                             columns=["shift", "dist_x", "dist_y", "defect", "payoff_mass", "shortfall_bound"])
        frame.insert(0, "n", self.n)
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "hedge_norms": list(self.hedge_norms), "rows": [vars(r) for r in self.rows],
                "exact": self.exact}


def gap_sequence(n: int, shifts: Sequence[int], hedge_norms: Tuple[float, float, float]) -> GapSequenceReport:
    """Off-diagonal shifted couplings on the uniform n-point grid of [0, 1].

    Each row bounds what any hedge with the given norms can lose on the
    off-diagonal indicator: the shortfall tends to -1 while the coupling tends
    to an admissible one.
    """
    if n < 2:
        raise PreconditionError("gap sequence needs at least two grid points", {"n": n})
    if len(hedge_norms) != 3:
        raise ShapeError("hedge norms are (B_b, B_c, G)")
    b_norm, c_norm, g_norm = (float(v) for v in hedge_norms)
    t = np.arange(n) / (n - 1)
    weight = 1.0 + t
    report = GapSequenceReport(n=n, hedge_norms=(b_norm, c_norm, g_norm))
    for s in shifts:
        s = int(s)
        if not 1 <= s < n:
            raise PreconditionError("shift out of range", {"shift": s, "n": n})
        cells = n - s
        eta_x = np.where(np.arange(n) < cells, 1.0 / cells, 0.0)
        eta_y = np.where(np.arange(n) >= s, 1.0 / cells, 0.0)
        dist_x = float(np.abs(eta_x - 1.0 / n) @ weight)
        dist_y = float(np.abs(eta_y - 1.0 / n) @ weight)
        # each of the charged cells holds 1/cells, moves s grid steps and sits off the diagonal
        cell_mass = Fraction(1, cells)
        defect = sum((cell_mass * Fraction(s, n - 1) for _ in range(cells)), Fraction(0))
        payoff_mass = sum((cell_mass for _ in range(cells)), Fraction(0))
        report.exact.append({"shift": s, "defect": str(defect), "payoff_mass": str(payoff_mass)})
        defect, payoff_mass = float(defect), float(payoff_mass)
        shortfall = b_norm * dist_x + c_norm * dist_y + g_norm * defect - payoff_mass
        report.rows.append(GapRow(shift=s, dist_x=dist_x, dist_y=dist_y, defect=defect,
                                  payoff_mass=payoff_mass, shortfall_bound=shortfall))
    return report
