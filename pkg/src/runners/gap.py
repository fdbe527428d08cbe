from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.duality import gap_sequence
from src.models import GapParameters, ProblemFile, ReportFile
from src.runners.base import BaseRunner

COLUMNS = ["n", "shift", "dist_x", "dist_y", "defect", "payoff_mass", "shortfall_bound"]


class GapRunner(BaseRunner):
    """Shifted off-diagonal couplings and the loss bound they force on bounded hedges."""

    mode = "gap"

    async def process(self, problem: ProblemFile) -> Dict[str, Any]:
        params = self.parameters(GapParameters, problem)
        report = gap_sequence(params.n, params.shifts, params.hedge_norms)
        shortfalls = [r.shortfall_bound for r in report.rows]
        return {
            "values": {"n": params.n, "best_shortfall": min(shortfalls) if shortfalls else None},
            "witnesses": {"rows": report.to_frame().to_dict(orient="records")},
            "diagnostics": {"hedge_norms": list(params.hedge_norms), "exact": report.exact},
        }

    def verify(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        failures: List[str] = []
        params = self.parameters(GapParameters, problem)
        expected = gap_sequence(params.n, params.shifts, params.hedge_norms).to_frame()
        got = pd.DataFrame(report.witnesses.get("rows", []))
        same_shape = list(got.columns) == COLUMNS and len(got) == len(expected)
        self.check(failures, same_shape, "gap rows have the wrong layout")
        if same_shape:
            diff = np.abs(got[COLUMNS].to_numpy(dtype=float) - expected[COLUMNS].to_numpy(dtype=float)).max(initial=0.0)
            self.check(failures, diff <= self.tolerance, "gap rows differ from the closed form")
        return failures

    def csv_frame(self, problem: ProblemFile, report: Dict[str, Any]) -> Optional[pd.DataFrame]:
        return pd.DataFrame(report.get("witnesses", {}).get("rows", []), columns=COLUMNS)
