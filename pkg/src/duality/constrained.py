"""Optimal transport under finitely many moment constraints ``eta(f_k) = 0``."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence
import logging

import numpy as np

from src.config import config_value
from src.duality.common import (
    DualityReport,
    TableLike,
    as_table,
    assemble_report,
    require_marginals,
    require_optimal,
)
from src.duality.programs import CouplingProgram, HedgeProgram
from src.duality.transport import all_cells, scan_cells, solve_ot
from src.errors import InfeasibleError, PreconditionError, StructuralAssumptionError
from src.lp import LpStatus, Sense, solve
from src.measures import DiscreteMeasure, SupportGrid

logger = logging.getLogger(__name__)


@dataclass
class MomentConstraintSet:
    tables: List[np.ndarray]
    lower: List[float] = field(default_factory=list)
    upper: List[float] = field(default_factory=list)
    tolerance: float = 1e-9

    @property
    def size(self) -> int:
        return len(self.tables)

    def admissible_at(self, k: int) -> bool:
        return self.lower[k] < -self.tolerance and self.upper[k] > self.tolerance

    @property
    def admissible(self) -> bool:
        return all(self.admissible_at(k) for k in range(self.size))

    def shift(self, k: int) -> Optional[float]:
        """Suggested ``b_k`` for an inadmissible constraint: the midpoint of its range."""
        if self.admissible_at(k):
            return None
        return 0.5 * (self.lower[k] + self.upper[k])

    def shift_repairs(self, k: int) -> bool:
        """Whether subtracting the suggested shift yields an admissible constraint."""
        return not self.admissible_at(k) and self.upper[k] - self.lower[k] > 2 * self.tolerance

    def bound(self, k: int) -> float:
        """``c*_k = max(1/p_up, 1/(-p_low))``; infinite when inadmissible."""
        if not self.admissible_at(k):
            return float("inf")
        return max(1.0 / self.upper[k], 1.0 / (-self.lower[k]))

    def to_dict(self) -> Dict[str, Any]:
        rows = []
        for k in range(self.size):
            bound = self.bound(k)
            rows.append({
                "k": k + 1,
                "lower": self.lower[k],
                "upper": self.upper[k],
                "admissible": self.admissible_at(k),
                "shift": self.shift(k),
                "shift_repairs": self.shift_repairs(k),
                "bound": None if np.isinf(bound) else bound,
            })
        return {"admissible": self.admissible, "constraints": rows}


def _coupling_program(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure,
                      tables: Sequence[np.ndarray], sense: Sense) -> CouplingProgram:
    program = CouplingProgram(grid, sense).x_marginal(mu.weights).y_marginal(nu.weights)
    for table in tables:
        program.moment(table)
    return program


def check_structure(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure,
                    fs: Sequence[TableLike], solver=None) -> MomentConstraintSet:
    """Range of ``eta(f_k)`` over couplings already satisfying ``eta(f_i) = 0`` for ``i < k``."""
    require_marginals(grid, mu, nu)
    cap = config_value("constrained", "max_constraints", 64)
    if len(fs) > cap:
        raise PreconditionError(f"at most {cap} moment constraints are supported",
                                {"given": len(fs)})
    tables = [as_table(f, grid) for f in fs]
    result = MomentConstraintSet(tables=tables, tolerance=config_value("tolerances", "residual", 1e-9))
    for k, table in enumerate(tables):
        program = _coupling_program(grid, mu, nu, tables[:k], Sense.MAX).objective(table)
        lp = program.build()
        hi = solve(lp, solver)
        if hi.status is LpStatus.INFEASIBLE:
            raise InfeasibleError(
                f"coupling set is empty before constraint {k + 1}",
                {"k": k + 1, "violating_constraint": k,
                 "certificate": None if hi.certificate is None else hi.certificate.tolist(),
                 "diagnostics": result.to_dict()},
            )
        lo = require_optimal(solve(lp.with_objective(lp.objective, Sense.MIN), solver),
                             f"lower range of constraint {k + 1}")
        result.lower.append(float(lo.objective))
        result.upper.append(float(require_optimal(hi, f"upper range of constraint {k + 1}").objective))
        logger.debug(f"constraint {k + 1}: range [{result.lower[-1]:.6g}, {result.upper[-1]:.6g}]")
    return result


def solve_cot(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure, payoff: TableLike,
              fs: Sequence[TableLike] = (), quasi_sure: bool = False, solver=None,
              structure: Optional[MomentConstraintSet] = None) -> DualityReport:
    """Constrained transport with moment multipliers on the dual side.

    The reported hedge is the dual optimiser with the smallest ``sum_k |a_k|``.
    With ``quasi_sure`` the domination is only enforced off the cells that no
    admissible coupling charges; ``zeta`` covers the rest.
    """
    if not fs and not quasi_sure:
        report = solve_ot(grid, mu, nu, payoff, solver)
        report.mode = "cot"
        return report
    structure = structure or check_structure(grid, mu, nu, fs, solver)
    if not structure.admissible:
        raise StructuralAssumptionError("moment constraints are not admissible",
                                        structure.to_dict())
    f = as_table(payoff, grid)
    tables = structure.tables

    primal = _coupling_program(grid, mu, nu, tables, Sense.MAX).objective(f)
    psol = require_optimal(solve(primal.build(), solver), "COT primal")

    cells = None
    polar_cells: List[List[int]] = []
    if quasi_sure:
        base = _coupling_program(grid, mu, nu, tables, Sense.MAX).build()
        values = scan_cells(base, grid, all_cells(grid), solver)
        polar = values <= config_value("tolerances", "polar_cell", 1e-10)
        cells = ~polar
        polar_cells = [[int(i), int(j)] for i, j in zip(*np.nonzero(polar))]

    dual = HedgeProgram(grid, n_moments=len(tables)).dominate(f, moments=tables, cells=cells)
    dual.center(mu.weights, nu.weights)
    dsol = require_optimal(solve(dual.build(), solver), "COT dual")
    value = float(dsol.objective)

    # among dual optimisers, pick the one with the smallest multipliers
    refined = HedgeProgram(grid, n_moments=len(tables)).dominate(f, moments=tables, cells=cells)
    refined.center(mu.weights, nu.weights).cap_cash(value + 1e-9 * (1.0 + abs(value)))
    refined.minimise_moment_norm()
    rsol = solve(refined.build(), solver)
    if rsol.status is LpStatus.OPTIMAL:
        dual, dsol = refined, rsol
    else:
        logger.warning("Minimal-norm dual re-solve failed; keeping the first dual optimiser")
    hedge = dual.hedge(dsol)
    if quasi_sure:
        mask = ~cells
        hedge.zeta = np.where(mask, np.maximum(f - hedge.table(grid, tables), 0.0), 0.0)

    return assemble_report("cot", grid, mu, nu, f, psol, primal.coupling(psol), dsol, hedge,
                           moments=tables,
                           extras={"structure": structure.to_dict(), "quasi_sure": quasi_sure,
                                   "polar_cells": polar_cells, "dual_lp_value": value})


@dataclass
class MultiplierBoundCheck:
    multipliers: List[float]
    stated: List[float]
    recursive: List[float]
    tolerance: float = 1e-7

    @property
    def margins(self) -> List[float]:
        return [b - abs(a) for a, b in zip(self.multipliers, self.stated)]

    @property
    def holds(self) -> bool:
        return all(m >= -self.tolerance for m in self.margins)

    @property
    def recursive_holds(self) -> bool:
        return all(r - abs(a) >= -self.tolerance for a, r in zip(self.multipliers, self.recursive))

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "multipliers": self.multipliers,
            "stated_bounds": self.stated,
            "margins": self.margins,
            "recursive_bounds": self.recursive,
            "holds": self.holds,
            "recursive_holds": self.recursive_holds,
        }


def multiplier_bound_check(report: DualityReport, structure: MomentConstraintSet,
                           tolerance: float = 1e-7) -> MultiplierBoundCheck:
    """Compare each ``|a_k|`` with ``c*_k`` and with ``c*_k * ||f - c - sum_{i>k} a_i f_i||``.

    The second bound holds for every dual-feasible hedge; the first is the
    unit-ball statement and assumes ``||f - c|| <= 1``.
    """
    a = [float(v) for v in np.asarray(report.hedge.moments)]
    stated = [structure.bound(k) for k in range(structure.size)]
    recursive = []
    for k in range(structure.size):
        z = report.payoff - report.hedge.cash
        for i in range(k + 1, structure.size):
            z = z - a[i] * structure.tables[i]
        recursive.append(stated[k] * float(np.abs(z).max(initial=0.0)))
    return MultiplierBoundCheck(multipliers=a, stated=stated, recursive=recursive, tolerance=tolerance)
