import asyncio
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.duality import (
    GridFunction,
    convex_envelope,
    envelope_as_supremum_check,
    envelope_values,
    is_convex_bidual,
    lower_hull_values,
)
from src.errors import ShapeError
from src.measures import Axis, DiscreteMeasure
from src.models import ProblemFile, ReportFile
from src.runners.base import BaseRunner


class EnvelopeRunner(BaseRunner):
    """Convexity and convex envelope of a function on the Y axis, evaluated on the X axis."""

    mode = "envelope"

    def _function(self, problem: ProblemFile):
        grid = problem.support_grid()
        problem.require("function")
        if len(problem.function) != grid.n:
            raise ShapeError("function does not match the Y axis",
                             {"values": len(problem.function), "points": grid.n})
        return grid, GridFunction(grid.Y, problem.function)

    def _alpha(self, problem: ProblemFile, grid) -> Optional[DiscreteMeasure]:
        if problem.alpha is None:
            return None
        if len(problem.alpha) != grid.m:
            raise ShapeError("alpha does not match the X axis",
                             {"weights": len(problem.alpha), "points": grid.m})
        return DiscreteMeasure(grid.X, problem.alpha, Axis.X, signed=True)

    async def process(self, problem: ProblemFile) -> Dict[str, Any]:
        grid, phi = self._function(problem)
        alpha = self._alpha(problem, grid)
        solver = self.options.solver
        convexity = await asyncio.to_thread(is_convex_bidual, phi, self.tolerance, solver)
        at_x = await asyncio.to_thread(envelope_values, phi, grid.X, solver)
        values: Dict[str, Any] = {"convex": convexity.convex, "worst_violation": convexity.worst,
                                  "envelope_alpha": None}
        if alpha is not None:
            values["envelope_alpha"] = await asyncio.to_thread(convex_envelope, phi, alpha, solver)
        witnesses: Dict[str, Any] = {"violating_spreads": convexity.spreads, "envelope_x": at_x.tolist()}
        diagnostics: Dict[str, Any] = {"skipped": convexity.skipped}
        if grid.dim == 1:
            check = await asyncio.to_thread(envelope_as_supremum_check, phi, self.tolerance, solver)
            witnesses["envelope_y"] = check.envelope.tolist()
            diagnostics["supremum_check"] = check.to_dict()
        return {"values": values, "witnesses": witnesses, "diagnostics": diagnostics}

    def verify(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        grid, phi = self._function(problem)
        scale = max(1.0, float(np.abs(phi.values).max()))
        tol = self.tolerance * scale

        for spread in report.witnesses.get("violating_spreads", []):
            i = int(spread["index"])
            idx = np.array([int(j) for j, _ in spread["weights"]], dtype=int)
            p = np.array([float(w) for _, w in spread["weights"]])
            self.check(failures, abs(p.sum() - 1.0) <= self.tolerance, f"spread at {i} is not a probability")
            self.check(failures, np.abs(p @ phi.points[idx] - phi.points[i]).max() <= tol,
                       f"spread at {i} has the wrong mean")
            self.check(failures, phi.values[i] - p @ phi.values[idx] > tol,
                       f"spread at {i} does not violate convexity")
        self.check(failures, bool(report.values.get("convex")) == (not report.witnesses.get("violating_spreads")),
                   "convexity flag disagrees with the reported spreads")

        if grid.dim == 1:
            t = phi.points[:, 0]
            hull_y = lower_hull_values(t, phi.values)
            hull_x = lower_hull_values(t, phi.values, grid.X[:, 0])
            env_y = np.asarray(report.witnesses.get("envelope_y", []), dtype=float)
            env_x = np.asarray(report.witnesses.get("envelope_x", []), dtype=float)
            self.check(failures, env_y.shape == hull_y.shape and np.abs(env_y - hull_y).max() <= tol,
                       "envelope on Y differs from the lower hull")
            inside = ~np.isnan(hull_x)
            self.check(failures, env_x.shape == hull_x.shape and np.abs(env_x[inside] - hull_x[inside]).max(initial=0.0) <= tol,
                       "envelope on X differs from the lower hull")
            self.check(failures, bool(report.values.get("convex")) == bool(np.abs(hull_y - phi.values).max() <= tol),
                       "convexity flag disagrees with the lower hull")
            if problem.alpha is not None:
                a = np.asarray(problem.alpha, dtype=float)
                expected = float(a @ hull_x) if inside.all() else None
                got = report.values.get("envelope_alpha")
                self.check(failures, expected is not None and got is not None and abs(got - expected) <= tol,
                           "envelope of alpha differs from the lower hull")
        return failures

    def csv_frame(self, problem: ProblemFile, report: Dict[str, Any]) -> Optional[pd.DataFrame]:
        grid, phi = self._function(problem)
        if grid.dim != 1:
            return None
        t = phi.points[:, 0]
        return pd.DataFrame({
            "index": np.arange(phi.size),
            "point": t,
            "phi": phi.values,
            "envelope": report.get("witnesses", {}).get("envelope_y"),
            "hull": lower_hull_values(t, phi.values),
        })
