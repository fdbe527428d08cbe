from abc import ABC, abstractmethod
import logging

from src.lp.program import LinearProgram, LpSolution


class LpSolver(ABC):
    """Abstract base class for LP backends."""

    name = "base"

    def __init__(self):
        self.logger = logging.getLogger(self.__class__.__name__)

    @abstractmethod
    def solve(self, lp: LinearProgram) -> LpSolution:
        """
        Solve a natural-form linear program.

        Args:
            lp: The program to solve.

        Returns:
            An LpSolution whose status is optimal, infeasible or unbounded.
            Residuals are filled in by an independent recomputation.
        """
        pass
