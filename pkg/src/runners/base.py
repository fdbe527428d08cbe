from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Type
import logging

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from src.config import settings
from src.errors import ShapeError
from src.measures import SupportGrid
from src.models import ProblemFile, ReportFile


@dataclass
class RunOptions:
    tolerance: float = 1e-9
    solver: Optional[str] = None
    seed: int = 0


class BaseRunner(ABC):
    """Base class for every problem mode.

    ``process`` solves and returns the report body (values, witnesses,
    diagnostics); ``verify`` re-checks a stored report against its problem
    without solving anything.
    """

    mode = ""

    def __init__(self, options: Optional[RunOptions] = None):
        self.options = options or RunOptions(tolerance=settings.tolerance)
        self.logger = logging.getLogger(self.__class__.__name__)

    @property
    def tolerance(self) -> float:
        return self.options.tolerance

    @abstractmethod
    async def process(self, problem: ProblemFile) -> Dict[str, Any]:
        """Solve the problem and return ``{"values", "witnesses", "diagnostics"}``."""
        pass

    @abstractmethod
    def verify(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        """Failed checks of a successful report; empty when it holds up."""
        pass

    def verify_error(self, problem: ProblemFile, report: ReportFile) -> List[str]:
        """Failed checks of an error report; by default nothing is re-derivable."""
        return []

    def csv_frame(self, problem: ProblemFile, report: Dict[str, Any]) -> Optional[pd.DataFrame]:
        return None

    def check(self, failures: List[str], ok: bool, message: str) -> None:
        if not ok:
            self.logger.warning(f"Check failed: {message}")
            failures.append(message)

    def coupling_table(self, grid: SupportGrid, triples: Any, failures: List[str]) -> np.ndarray:
        """Dense table from ``[i, j, weight]`` triples; sign is checked, not enforced."""
        eta = np.zeros(grid.shape)
        for entry in triples or []:
            i, j, w = int(entry[0]), int(entry[1]), float(entry[2])
            if not (0 <= i < grid.m and 0 <= j < grid.n):
                failures.append(f"coupling entry {[i, j]} is off the grid")
                continue
            eta[i, j] += w
        self.check(failures, eta.min(initial=0.0) >= -self.tolerance, "coupling has negative entries")
        return eta

    def parameters(self, model: Type[BaseModel], problem: ProblemFile) -> BaseModel:
        try:
            return model.model_validate(problem.parameters)
        except ValidationError as e:
            raise ShapeError(f"invalid parameters for mode '{self.mode}'",
                             {"errors": [{"loc": [str(p) for p in err["loc"]], "msg": err["msg"]}
                                         for err in e.errors()]})


def point_value(axis_points: np.ndarray, k: int):
    """Scalar in 1D, list otherwise; what CSV rows and reports show for a grid point."""
    return float(axis_points[k, 0]) if axis_points.shape[1] == 1 else axis_points[k].tolist()
