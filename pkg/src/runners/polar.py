import asyncio
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.config import config_value
from src.duality import polar_scan_mot, polar_scan_ot
from src.duality.mot import touching_points, witness_table
from src.errors import ConvexOrderError
from src.measures import check_convex_order_potential
from src.models import PolarParameters, ProblemFile, ReportFile
from src.runners.base import BaseRunner, point_value


class PolarRunner(BaseRunner):
    """Cells that no admissible coupling charges, with their certificates."""

    mode = "polar"

    async def process(self, problem: ProblemFile) -> Dict[str, Any]:
        params = self.parameters(PolarParameters, problem)
        grid = problem.support_grid()
        mu, nu = problem.marginals(grid)
        if params.kind == "ot":
            cert = await asyncio.to_thread(polar_scan_ot, grid, mu, nu, None, self.options.solver,
                                           problem.constraint_tables(grid))
        else:
            cert = await asyncio.to_thread(polar_scan_mot, grid, mu, nu, params.full_scan, self.options.solver)
        self.logger.info(f"{len(cert.polar_cells)} polar cells among {int(cert.scanned.sum())} scanned")
        return {
            "values": {"kind": params.kind, "polar_cells": len(cert.polar_cells),
                       "scanned_cells": int(cert.scanned.sum()), "cover_exact": cert.cover_exact,
                       "touching_points": cert.touching_points},
            "witnesses": {"certificate": cert.to_dict()},
            "diagnostics": {"tolerance": cert.tolerance},
        }

    def verify(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        params = self.parameters(PolarParameters, problem)
        grid = problem.support_grid()
        mu, nu = problem.marginals(grid)
        cert = report.witnesses.get("certificate") or {}
        tol = config_value("tolerances", "polar_cell", 1e-10)
        values = np.array([[np.nan if v is None else v for v in row] for row in cert.get("cell_values", [])],
                          dtype=float).reshape(grid.shape)
        scanned = ~np.isnan(values)
        polar = np.zeros(grid.shape, dtype=bool)
        polar[scanned] = values[scanned] <= tol
        listed = {tuple(c) for c in cert.get("polar_cells", [])}
        self.check(failures, listed == {(int(i), int(j)) for i, j in zip(*np.nonzero(polar))},
                   "listed polar cells disagree with the cell values")

        if params.kind == "ot" and not problem.constraints:
            expected = np.zeros(grid.shape, dtype=bool)
            expected[mu.weights == 0, :] = True
            expected[:, nu.weights == 0] = True
            self.check(failures, bool(np.all(polar[scanned] == expected[scanned])),
                       "polar cells do not match the zero-atom cover")
        if params.kind == "mot":
            points = touching_points(mu, nu)
            self.check(failures, np.allclose(points, cert.get("touching_points", []), atol=1e-12),
                       "touching points differ")
            for rect in cert.get("rectangles", []):
                x0 = float(rect["x0"])
                a = witness_table(grid, x0)
                cells = [tuple(c) for c in rect["cells"]]
                self.check(failures, all(polar[c] for c in cells) == bool(rect["certified"]),
                           f"rectangle at {x0} certification disagrees with cell values")
                self.check(failures, a.min() >= -1e-12, f"witness at {x0} is negative somewhere")
                self.check(failures, all(a[c] > 0 for c in cells),
                           f"witness at {x0} vanishes inside its rectangle")
                self.check(failures, float(rect["witness_value"]) <= 1e-9,
                           f"witness at {x0} is charged by a martingale coupling")
        return failures

    def verify_error(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        if report.error is not None and report.error.kind == ConvexOrderError.kind:
            grid = problem.support_grid()
            mu, nu = problem.marginals(grid)
            self.check(failures, not check_convex_order_potential(mu, nu).ordered,
                       "marginals are in convex order after all")
        return failures

    def csv_frame(self, problem: ProblemFile, report: Dict[str, Any]) -> Optional[pd.DataFrame]:
        grid = problem.support_grid()
        cert = report.get("witnesses", {}).get("certificate", {})
        rows = []
        for i, row in enumerate(cert.get("cell_values", [])):
            for j, v in enumerate(row):
                if v is not None:
                    rows.append({"i": i, "j": j, "x": point_value(grid.X, i), "y": point_value(grid.Y, j),
                                 "cell_max": v})
        return pd.DataFrame(rows, columns=["i", "j", "x", "y", "cell_max"])
