"""Classical optimal transport on a finite grid.

Primal: maximise ``eta(f)`` over couplings with marginals ``mu``, ``nu``.
Dual: minimise cash ``c`` with ``c + h(x) + g(y) >= f(x, y)`` and centred
statics ``mu(h) = nu(g) = 0``. Both are solved as independent LPs.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple
import logging

import numpy as np

from src.config import config_value
from src.duality.common import (
    DualityReport,
    Hedge,
    PolarCertificate,
    TableLike,
    as_table,
    assemble_report,
    outer_sum,
    require_marginals,
    require_optimal,
)
from src.duality.programs import CouplingProgram, HedgeProgram
from src.errors import PreconditionError, ShapeError
from src.lp import LinearProgram, LpBuilder, Relation, Sense, solve
from src.measures import DiscreteMeasure, SupportGrid
from src.utils.parallel import fan_out

logger = logging.getLogger(__name__)

# truncation level used when normalising a decomposition
TRUNCATION = 2.0


def solve_ot(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure, payoff: TableLike,
             solver=None) -> DualityReport:
    require_marginals(grid, mu, nu)
    f = as_table(payoff, grid)

    primal = CouplingProgram(grid, Sense.MAX).objective(f)
    primal.x_marginal(mu.weights).y_marginal(nu.weights)
    psol = require_optimal(solve(primal.build(), solver), "OT primal")

    dual = HedgeProgram(grid).dominate(f).center(mu.weights, nu.weights)
    dsol = require_optimal(solve(dual.build(), solver), "OT dual")

    report = assemble_report("ot", grid, mu, nu, f, psol, primal.coupling(psol), dsol, dual.hedge(dsol))
    logger.debug(f"OT primal {report.primal:.6g}, dual {report.dual:.6g}")
    return report


@dataclass
class OtDecomposition:
    b: np.ndarray
    c: np.ndarray
    n: np.ndarray
    radius: float
    centered_input: bool
    reconstruction_error: float

    @property
    def b_norm(self) -> float:
        return float(np.abs(self.b).max(initial=0.0))

    @property
    def c_norm(self) -> float:
        return float(np.abs(self.c).max(initial=0.0))

    def bounds_hold(self, tol: float = 1e-9) -> bool:
        R = self.radius
        return (self.b_norm <= 3 * R + tol and self.c_norm <= 3 * R + tol
                and self.n.min(initial=0.0) >= -7 * R - tol and self.n.max(initial=0.0) <= tol)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "n": self.n.tolist(),
            "radius": self.radius,
            "b_norm": self.b_norm,
            "c_norm": self.c_norm,
            "n_min": float(self.n.min(initial=0.0)),
            "n_max": float(self.n.max(initial=0.0)),
            "centered_input": self.centered_input,
            "reconstruction_error": self.reconstruction_error,
            "bounds_hold": self.bounds_hold(),
        }


def normalize_ot_decomposition(b0: np.ndarray, c0: np.ndarray, n0: np.ndarray, radius: float,
                               mu: DiscreteMeasure, nu: DiscreteMeasure) -> OtDecomposition:
    """Rebuild ``z0 = b0(+)c0 + n0`` as ``b2(+)c2 + n2`` with bounded centred statics.

    The statics are truncated from above at 2R and recentred; the remainder is
    absorbed into ``n2``. The 3R / 7R bounds are guaranteed when ``mu(b0) =
    nu(c0) = 0``; ``centered_input`` records whether that held.
    """
    b0 = np.asarray(b0, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    if b0.shape != (mu.size,) or c0.shape != (nu.size,) or n0.shape != (mu.size, nu.size):
        raise ShapeError("decomposition parts do not match the marginals")
    if radius <= 0:
        raise PreconditionError("radius must be positive", {"radius": radius})
    if np.any(n0 > 1e-12):
        i, j = np.unravel_index(int(np.argmax(n0)), n0.shape)
        raise PreconditionError("negative part must be nonpositive", {"cell": [int(i), int(j)]})
    z0 = outer_sum(b0, c0) + n0
    over = np.abs(z0) > radius * (1.0 + 1e-12)
    if over.any():
        i, j = np.unravel_index(int(np.argmax(np.abs(z0))), z0.shape)
        raise PreconditionError("element lies outside the ball of the given radius",
                                {"cell": [int(i), int(j)], "value": float(z0[i, j]), "radius": radius})

    b1 = np.minimum(b0 / radius, TRUNCATION)
    c1 = np.minimum(c0 / radius, TRUNCATION)
    b2 = (b1 - mu.integrate(b1)) * radius
    c2 = (c1 - nu.integrate(c1)) * radius
    n2 = z0 - outer_sum(b2, c2)
    error = float(np.abs(outer_sum(b2, c2) + n2 - z0).max(initial=0.0))
    centered = abs(mu.integrate(b0)) <= 1e-9 * radius and abs(nu.integrate(c0)) <= 1e-9 * radius
    return OtDecomposition(b=b2, c=c2, n=n2, radius=float(radius), centered_input=centered,
                           reconstruction_error=error)


def scan_cells(base: LinearProgram, grid: SupportGrid, cells: Iterable[Tuple[int, int]],
               solver=None, desc: str = "polar cells") -> np.ndarray:
    """Per-cell LP ``max eta_ij`` over the feasible set of ``base``; NaN where not scanned."""
    cells = list(cells)
    values = np.full(grid.shape, np.nan)

    def cell_max(cell: Tuple[int, int]) -> float:
        i, j = cell
        objective = np.zeros(base.num_vars)
        objective[i * grid.n + j] = 1.0
        sol = require_optimal(solve(base.with_objective(objective, Sense.MAX), solver), "polar cell LP")
        return float(sol.objective)

    for (i, j), v in zip(cells, fan_out(cell_max, cells, desc=desc)):
        values[i, j] = v
    return values


def all_cells(grid: SupportGrid) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(grid.m) for j in range(grid.n)]


def polar_scan_ot(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure,
                  cells: Optional[Sequence[Tuple[int, int]]] = None, solver=None,
                  moments: Sequence[np.ndarray] = ()) -> PolarCertificate:
    """Cells no admissible coupling charges, with the zero-atom (Kellerer) cover."""
    require_marginals(grid, mu, nu)
    program = CouplingProgram(grid, Sense.MAX).x_marginal(mu.weights).y_marginal(nu.weights)
    for table in moments:
        program.moment(table)
    tol = config_value("tolerances", "polar_cell", 1e-10)
    values = scan_cells(program.build(), grid, all_cells(grid) if cells is None else cells, solver)

    a_set = np.flatnonzero(mu.weights == 0)
    b_set = np.flatnonzero(nu.weights == 0)
    expected = np.zeros(grid.shape, dtype=bool)
    expected[a_set, :] = True
    expected[:, b_set] = True
    cert = PolarCertificate(mode="ot", cell_values=values, tolerance=tol,
                            kellerer_a=a_set.tolist(), kellerer_b=b_set.tolist())
    if not moments:
        scanned = cert.scanned
        cert.cover_exact = bool(np.all(cert.polar_mask[scanned] == expected[scanned]))
        if not cert.cover_exact:
            logger.error("Polar cells do not match the zero-atom cover")
    return cert


def bb_superhedge(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure, payoff: TableLike,
                  solver=None, polar: Optional[PolarCertificate] = None) -> Tuple[Hedge, float]:
    """Quasi-sure superhedge: dominate off polar cells, cover polar cells with ``zeta``."""
    require_marginals(grid, mu, nu)
    xi = as_table(payoff, grid)
    polar = polar or polar_scan_ot(grid, mu, nu, solver=solver)
    mask = polar.polar_mask

    dual = HedgeProgram(grid).dominate(xi, cells=~mask).center(mu.weights, nu.weights)
    dsol = require_optimal(solve(dual.build(), solver), "quasi-sure superhedge")
    hedge = dual.hedge(dsol)
    hedge.zeta = np.where(mask, np.maximum(xi - hedge.table(grid), 0.0), 0.0)
    return hedge, float(hedge.cash)


@dataclass
class QuotientDistance:
    sup_side: float
    inf_side: float
    weighted: bool
    hedge: Hedge
    signed_measure: np.ndarray
    scale: float
    extras: Dict[str, Any] = field(default_factory=dict)

    def agree(self, tol: Optional[float] = None) -> bool:
        tol = config_value("tolerances", "duality_gap", 1e-7) if tol is None else tol
        return abs(self.sup_side - self.inf_side) <= tol * (1.0 + abs(self.inf_side))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sup_side": self.sup_side,
            "inf_side": self.inf_side,
            "weighted": self.weighted,
            "hedge": self.hedge.to_dict(),
            "signed_measure": self.signed_measure.tolist(),
            "scale": self.scale,
            "agree": self.agree(),
        }


def quotient_distance(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure, payoff: TableLike,
                      weighted: bool = False, solver=None) -> QuotientDistance:
    """Distance of ``a`` to the centred statics, computed from both sides.

    inf side: smallest ``c`` with ``-c e <= a - h(+)g <= c e``.
    sup side: largest ``eta(a)`` over signed ``eta`` with ``eta_x = t mu``,
    ``eta_y = t nu`` and ``e(|eta|) <= 1``.
    """
    grid.check_measures(mu, nu)
    a = as_table(payoff, grid)
    unit = grid.ell if weighted else np.ones(grid.shape)

    inf_prog = HedgeProgram(grid).band(a, unit).center(mu.weights, nu.weights)
    inf_sol = require_optimal(solve(inf_prog.build(), solver), "quotient inf side")
    hedge = inf_prog.hedge(inf_sol)

    m, n = grid.shape
    builder = LpBuilder(Sense.MAX)
    pos = builder.add_variables(m * n, lower=0.0, cost=a.reshape(-1))
    neg = builder.add_variables(m * n, lower=0.0, cost=-a.reshape(-1))
    t = int(builder.add_variables(1, lower=-np.inf)[0])
    pos2, neg2 = pos.reshape(m, n), neg.reshape(m, n)
    for i in range(m):
        builder.add_row(list(pos2[i]) + list(neg2[i]) + [t],
                        [1.0] * n + [-1.0] * n + [-mu.weights[i]], Relation.EQ, 0.0)
    for j in range(n):
        builder.add_row(list(pos2[:, j]) + list(neg2[:, j]) + [t],
                        [1.0] * m + [-1.0] * m + [-nu.weights[j]], Relation.EQ, 0.0)
    builder.add_row(np.concatenate([pos, neg]), np.concatenate([unit.reshape(-1)] * 2),
                    Relation.LE, 1.0)
    sup_sol = require_optimal(solve(builder.build(), solver), "quotient sup side")
    eta = (sup_sol.x[pos] - sup_sol.x[neg]).reshape(m, n)

    return QuotientDistance(sup_side=float(sup_sol.objective), inf_side=float(inf_sol.objective),
                            weighted=weighted, hedge=hedge, signed_measure=eta,
                            scale=float(sup_sol.x[t]))
