import asyncio
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.config import config_value
from src.duality import Hedge, check_structure, multiplier_bound_check, solve_cot, solve_mot, solve_ot
from src.measures import check_convex_order_potential
from src.models import CotParameters, ProblemFile, ReportFile
from src.runners.base import BaseRunner, point_value


class TransportRunner(BaseRunner):
    """Primal and dual transport problems: plain, moment-constrained and martingale."""

    def __init__(self, mode: str, options=None):
        super().__init__(options)
        self.mode = mode

    async def process(self, problem: ProblemFile) -> Dict[str, Any]:
        grid = problem.support_grid()
        mu, nu = problem.marginals(grid)
        payoff = problem.payoff_table(grid)
        solver = self.options.solver
        extra: Dict[str, Any] = {}

        if self.mode == "ot":
            report = await asyncio.to_thread(solve_ot, grid, mu, nu, payoff, solver)
        elif self.mode == "mot":
            report = await asyncio.to_thread(solve_mot, grid, mu, nu, payoff, solver)
        else:
            params = self.parameters(CotParameters, problem)
            tables = problem.constraint_tables(grid)
            structure = None
            if tables:
                structure = await asyncio.to_thread(check_structure, grid, mu, nu, tables, solver)
            report = await asyncio.to_thread(solve_cot, grid, mu, nu, payoff, tables, params.quasi_sure,
                                             solver, structure)
            if structure is not None:
                extra["multiplier_bounds"] = multiplier_bound_check(report, structure).to_dict()

        self.logger.info(f"{self.mode} primal {report.primal:.10g}, dual {report.dual:.10g}")
        body = report.to_dict()
        body["values"]["relative_gap"] = report.relative_gap
        body["diagnostics"].update(extra)
        body["diagnostics"]["strong_duality"] = report.strong_duality()
        body["diagnostics"]["attained"] = report.attained()
        return body

    def verify(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        grid = problem.support_grid()
        mu, nu = problem.marginals(grid)
        payoff = problem.payoff_table(grid)
        tables = problem.constraint_tables(grid) if self.mode == "cot" else []
        scale = max(1.0, float(np.abs(payoff).max()))
        tol = self.tolerance * scale

        eta = self.coupling_table(grid, report.witnesses.get("coupling"), failures)
        self.check(failures, np.abs(eta.sum(axis=1) - mu.weights).max() <= self.tolerance,
                   "coupling x-marginal differs from mu")
        self.check(failures, np.abs(eta.sum(axis=0) - nu.weights).max() <= self.tolerance,
                   "coupling y-marginal differs from nu")
        if self.mode == "mot":
            defect = eta @ grid.Y - eta.sum(axis=1)[:, None] * grid.X
            self.check(failures, np.abs(defect).max() <= self.tolerance * max(1.0, float(np.abs(grid.Y).max())),
                       "coupling is not a martingale")
        for k, f in enumerate(tables):
            self.check(failures, abs(float(np.sum(eta * f))) <= tol, f"moment constraint {k + 1} violated")

        hedge = Hedge.from_dict(report.witnesses.get("hedge") or {})
        slack = hedge.table(grid, tables) - payoff
        self.check(failures, slack.min() >= -tol, "hedge does not dominate the payoff")
        self.check(failures, abs(mu.integrate(hedge.h)) + abs(nu.integrate(hedge.g)) <= tol,
                   "static parts are not centred")

        primal = float(np.sum(eta * payoff))
        reported_primal = report.values.get("primal")
        reported_dual = report.values.get("dual")
        self.check(failures, reported_primal is not None and abs(primal - reported_primal) <= tol,
                   "primal value does not match the coupling")
        self.check(failures, reported_dual is not None and abs(hedge.cash - reported_dual) <= tol,
                   "dual value does not match the hedge")
        if reported_primal is not None and reported_dual is not None:
            gap_tol = config_value("tolerances", "duality_gap", 1e-7)
            self.check(failures, abs(reported_primal - reported_dual) <= gap_tol * (1.0 + abs(reported_primal)),
                       "duality gap exceeds tolerance")
        cs_tol = config_value("tolerances", "complementarity", 1e-8)
        self.check(failures, abs(float(np.sum(eta * slack))) <= cs_tol * scale,
                   "complementary slackness fails")
        return failures

    def verify_error(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        if report.error is None or report.error.kind != "not_convex_order":
            return failures
        grid = problem.support_grid()
        if grid.dim == 1:
            mu, nu = problem.marginals(grid)
            self.check(failures, not check_convex_order_potential(mu, nu).ordered,
                       "marginals are in convex order after all")
        return failures

    def csv_frame(self, problem: ProblemFile, report: Dict[str, Any]) -> Optional[pd.DataFrame]:
        grid = problem.support_grid()
        rows = [{"i": i, "j": j, "x": point_value(grid.X, i), "y": point_value(grid.Y, j), "weight": w}
                for i, j, w in report.get("witnesses", {}).get("coupling", [])]
        return pd.DataFrame(rows, columns=["i", "j", "x", "y", "weight"])
