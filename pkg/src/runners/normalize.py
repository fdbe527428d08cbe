import asyncio
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.duality import normalize_mot_decomposition, normalize_ot_decomposition
from src.duality.common import outer_sum, trading_table
from src.errors import ShapeError
from src.models import NormalizeParameters, ProblemFile, ReportFile
from src.runners.base import BaseRunner


class NormalizeRunner(BaseRunner):
    """Rewrite a dual decomposition with the norm bounds of its kind."""

    mode = "normalize"

    def _inputs(self, problem: ProblemFile):
        params = self.parameters(NormalizeParameters, problem)
        grid = problem.support_grid()
        mu, nu = problem.marginals(grid)
        if params.kind == "ot" and (params.n is None or params.radius is None):
            raise ShapeError("OT normalisation needs 'n' and 'radius'")
        if params.kind == "mot" and params.gamma is None:
            raise ShapeError("MOT normalisation needs 'gamma'")
        return params, grid, mu, nu

    async def process(self, problem: ProblemFile) -> Dict[str, Any]:
        params, grid, mu, nu = self._inputs(problem)
        if params.kind == "ot":
            result = await asyncio.to_thread(normalize_ot_decomposition, np.asarray(params.b), np.asarray(params.c),
                                             np.asarray(params.n), params.radius, mu, nu)
            out = result.to_dict()
            parts = {k: out.pop(k) for k in ("b", "c", "n")}
        else:
            result = await asyncio.to_thread(normalize_mot_decomposition, grid, mu, nu, params.b, params.c,
                                             params.gamma, params.anchor)
            out = result.to_dict()
            parts = {k: out.pop(k) for k in ("b", "c", "gamma")}
        return {
            "values": {"kind": params.kind, "bounds_hold": out["bounds_hold"],
                       "reconstruction_error": out["reconstruction_error"]},
            "witnesses": parts,
            "diagnostics": out,
        }

    def verify(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        params, grid, mu, nu = self._inputs(problem)
        w = report.witnesses
        b = np.asarray(w.get("b", []), dtype=float)
        c = np.asarray(w.get("c", []), dtype=float)
        if b.shape != (grid.m,) or c.shape != (grid.n,):
            return ["normalised statics have the wrong shape"]
        self.check(failures, abs(mu.integrate(b)) + abs(nu.integrate(c)) <= self.tolerance * max(1.0, np.abs(b).max()),
                   "normalised statics are not centred")
        if params.kind == "ot":
            n = np.asarray(w.get("n", []), dtype=float)
            original = outer_sum(params.b, params.c) + np.asarray(params.n)
            R = params.radius
            self.check(failures, n.shape == grid.shape and np.abs(outer_sum(b, c) + n - original).max() <= 1e-12 * max(1.0, R),
                       "normalised parts do not rebuild the input")
            self.check(failures, np.abs(b).max() <= 3 * R + self.tolerance and np.abs(c).max() <= 3 * R + self.tolerance,
                       "statics exceed 3R")
            self.check(failures, n.size > 0 and n.min() >= -7 * R - self.tolerance and n.max() <= self.tolerance,
                       "negative part leaves [-7R, 0]")
        else:
            gamma = np.asarray(w.get("gamma", []), dtype=float)
            original = outer_sum(params.b, params.c) + trading_table(grid, np.asarray(params.gamma, dtype=float))
            rebuilt = outer_sum(b, c) + trading_table(grid, gamma)
            scale = max(1.0, float(np.abs(original).max()))
            self.check(failures, np.abs(rebuilt - original).max() <= 1e-12 * scale * 10,
                       "normalised parts do not rebuild the input")
            d = report.diagnostics
            self.check(failures, bool(d.get("bounds_hold")) == (
                d.get("b_norm", np.inf) <= d.get("b_bound", -np.inf) + 1e-9
                and d.get("c_norm", np.inf) <= d.get("c_bound", -np.inf) + 1e-9),
                "bound flag disagrees with the reported norms")
        return failures

    def csv_frame(self, problem: ProblemFile, report: Dict[str, Any]) -> Optional[pd.DataFrame]:
        rows = []
        for axis, values in report.get("witnesses", {}).items():
            for index, value in enumerate(np.asarray(values, dtype=float).reshape(-1)):
                rows.append({"axis": axis, "index": index, "value": value})
        return pd.DataFrame(rows, columns=["axis", "index", "value"])
