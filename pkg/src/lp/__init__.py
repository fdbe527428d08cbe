"""Linear programming engine shared by every duality operation."""

from typing import Optional, Union

from src.config import settings
from src.lp.base_solver import LpSolver
from src.lp.highs import HighsSolver
from src.lp.program import (
    LinearProgram,
    LpBuilder,
    LpSolution,
    LpStatus,
    Relation,
    ResidualReport,
    Sense,
)
from src.lp.simplex import SimplexSolver
from src.lp.verify import verify

SOLVERS = {
    SimplexSolver.name: SimplexSolver,
    HighsSolver.name: HighsSolver,
}


def get_solver(name: Optional[str] = None) -> LpSolver:
    """Fresh solver instance; instances are single-use and never shared."""
    key = (name or settings.solver_backend).lower()
    if key not in SOLVERS:
        raise ValueError(f"Unknown LP backend: {key}. Choose from {sorted(SOLVERS)}")
    return SOLVERS[key]()


def solve(lp: LinearProgram, solver: Union[str, LpSolver, None] = None) -> LpSolution:
    backend = solver if isinstance(solver, LpSolver) else get_solver(solver)
    return backend.solve(lp)


__all__ = [
    "LinearProgram",
    "LpBuilder",
    "LpSolution",
    "LpSolver",
    "LpStatus",
    "Relation",
    "ResidualReport",
    "Sense",
    "SimplexSolver",
    "HighsSolver",
    "get_solver",
    "solve",
    "verify",
]
