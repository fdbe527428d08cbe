import asyncio
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.errors import ConvexOrderError
from src.measures import check_convex_order_lp, check_convex_order_potential, potentials
from src.models import ProblemFile, ReportFile
from src.runners.base import BaseRunner
from src.utils.sampling import random_order_pairs


class OrderRunner(BaseRunner):
    """Convex order by the martingale-coupling LP, cross-checked by potentials in 1D."""

    mode = "order"

    async def process(self, problem: ProblemFile) -> Dict[str, Any]:
        grid = problem.support_grid()
        mu, nu = problem.marginals(grid)
        by_lp = await asyncio.to_thread(check_convex_order_lp, mu, nu, self.options.solver)
        by_potential = check_convex_order_potential(mu, nu) if grid.dim == 1 else None
        agree = by_potential is None or by_potential.ordered == by_lp.ordered
        if not agree:
            self.logger.error("Potential and LP order checks disagree")

        if not by_lp.ordered:
            details = {"lp": by_lp.to_dict(), "agree": agree}
            if by_potential is not None:
                details["potential"] = by_potential.to_dict()
                details["violation_point"] = by_potential.violation_point
            raise ConvexOrderError("marginals are not in convex order", details)

        return {
            "values": {"ordered": True, "barycenter_gap": by_lp.barycenter_gap},
            "witnesses": {"coupling": by_lp.coupling.triples()},
            "diagnostics": {"potential": None if by_potential is None else by_potential.to_dict(),
                            "agree": agree},
        }

    async def random_suite(self, count: int) -> Dict[str, Any]:
        """Potential and LP verdicts on ``count`` random 1D pairs."""
        rng = np.random.default_rng(self.options.seed)
        pairs = random_order_pairs(rng, count)
        ordered, mismatches = 0, []
        for k, (mu, nu) in enumerate(pairs):
            lp = await asyncio.to_thread(check_convex_order_lp, mu, nu, self.options.solver)
            pot = check_convex_order_potential(mu, nu)
            ordered += int(lp.ordered)
            if lp.ordered != pot.ordered:
                mismatches.append({"pair": k, "mu": [mu.points[:, 0].tolist(), mu.weights.tolist()],
                                   "nu": [nu.points[:, 0].tolist(), nu.weights.tolist()],
                                   "lp": lp.ordered, "potential": pot.ordered})
        self.logger.info(f"{count} random pairs, {ordered} ordered, {len(mismatches)} disagreements")
        return {
            "values": {"pairs": count, "ordered": ordered, "disagreements": len(mismatches)},
            "witnesses": {"mismatches": mismatches},
            "diagnostics": {"seed": self.options.seed},
        }

    def verify(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        grid = problem.support_grid()
        mu, nu = problem.marginals(grid)
        eta = self.coupling_table(grid, report.witnesses.get("coupling"), failures)
        self.check(failures, np.abs(eta.sum(axis=1) - mu.weights).max() <= self.tolerance,
                   "coupling x-marginal differs from mu")
        self.check(failures, np.abs(eta.sum(axis=0) - nu.weights).max() <= self.tolerance,
                   "coupling y-marginal differs from nu")
        defect = eta @ grid.Y - eta.sum(axis=1)[:, None] * grid.X
        self.check(failures, np.abs(defect).max() <= self.tolerance * max(1.0, float(np.abs(grid.Y).max())),
                   "coupling is not a martingale")
        if grid.dim == 1:
            self.check(failures, check_convex_order_potential(mu, nu).ordered,
                       "potentials are not ordered")
        return failures

    def verify_error(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        grid = problem.support_grid()
        if report.error is not None and report.error.kind == "not_convex_order" and grid.dim == 1:
            mu, nu = problem.marginals(grid)
            self.check(failures, not check_convex_order_potential(mu, nu).ordered,
                       "marginals are in convex order after all")
        return failures

    def csv_frame(self, problem: ProblemFile, report: Dict[str, Any]) -> Optional[pd.DataFrame]:
        if problem.grid is None or problem.mu is None:
            return None
        grid = problem.support_grid()
        if grid.dim != 1:
            return None
        mu, nu = problem.marginals(grid)
        points = np.unique(np.concatenate([grid.X[:, 0], grid.Y[:, 0], mu.barycenter, nu.barycenter]))
        return pd.DataFrame({"point": points, "u_mu": potentials(mu, points), "u_nu": potentials(nu, points)})
