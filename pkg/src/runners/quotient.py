import asyncio
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.config import config_value
from src.duality import Hedge, quotient_distance
from src.duality.common import outer_sum
from src.models import ProblemFile, QuotientParameters, ReportFile
from src.runners.base import BaseRunner


class QuotientRunner(BaseRunner):
    """Distance of a payoff to the centred statics, from the hedge side and the measure side."""

    mode = "quotient"

    async def process(self, problem: ProblemFile) -> Dict[str, Any]:
        params = self.parameters(QuotientParameters, problem)
        grid = problem.support_grid()
        mu, nu = problem.marginals(grid)
        result = await asyncio.to_thread(quotient_distance, grid, mu, nu, problem.payoff_table(grid),
                                         params.weighted, self.options.solver)
        if not result.agree():
            self.logger.error(f"Quotient sides differ: {result.sup_side} vs {result.inf_side}")
        return {
            "values": {"sup_side": result.sup_side, "inf_side": result.inf_side,
                       "gap": abs(result.sup_side - result.inf_side)},
            "witnesses": {"hedge": result.hedge.to_dict(), "signed_measure": result.signed_measure.tolist(),
                          "scale": result.scale},
            "diagnostics": {"weighted": params.weighted, "agree": result.agree()},
        }

    def verify(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        params = self.parameters(QuotientParameters, problem)
        grid = problem.support_grid()
        mu, nu = problem.marginals(grid)
        a = problem.payoff_table(grid)
        unit = grid.ell if params.weighted else np.ones(grid.shape)
        tol = self.tolerance * max(1.0, float(np.abs(a).max()))
        sup_side = report.values.get("sup_side")
        inf_side = report.values.get("inf_side")
        if sup_side is None or inf_side is None:
            return ["quotient values are missing"]

        hedge = Hedge.from_dict(report.witnesses.get("hedge") or {})
        residual = np.abs(a - outer_sum(hedge.h, hedge.g)) - inf_side * unit
        self.check(failures, residual.max() <= tol, "statics do not come within the reported distance")
        self.check(failures, abs(mu.integrate(hedge.h)) + abs(nu.integrate(hedge.g)) <= tol,
                   "static parts are not centred")

        eta = np.asarray(report.witnesses.get("signed_measure", []), dtype=float)
        t = float(report.witnesses.get("scale", 0.0))
        if eta.shape != grid.shape:
            return failures + ["signed measure has the wrong shape"]
        self.check(failures, np.abs(eta.sum(axis=1) - t * mu.weights).max() <= self.tolerance,
                   "signed measure x-marginal differs from t mu")
        self.check(failures, np.abs(eta.sum(axis=0) - t * nu.weights).max() <= self.tolerance,
                   "signed measure y-marginal differs from t nu")
        self.check(failures, float(np.sum(unit * np.abs(eta))) <= 1.0 + self.tolerance,
                   "signed measure exceeds the unit ball")
        self.check(failures, abs(float(np.sum(eta * a)) - sup_side) <= tol, "sup side does not match the measure")
        gap_tol = config_value("tolerances", "duality_gap", 1e-7)
        self.check(failures, abs(sup_side - inf_side) <= gap_tol * (1.0 + abs(inf_side)), "the two sides differ")
        return failures

    def csv_frame(self, problem: ProblemFile, report: Dict[str, Any]) -> Optional[pd.DataFrame]:
        values = report.get("values", {})
        return pd.DataFrame({"side": ["sup", "inf"], "value": [values.get("sup_side"), values.get("inf_side")]})
