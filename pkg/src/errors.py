"""Exception hierarchy shared by the solvers, the pipeline and the CLI.

Every error knows the process exit code it maps to and carries a ``details``
dict that ends up verbatim in the report's ``"error"`` object.
"""

from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for every failure the lab reports to its caller."""

    exit_code = 1
    kind = "error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class VerificationError(LabError):
    """A stored report failed an independent re-check."""

    exit_code = 1
    kind = "verification_failed"


class InfeasibleError(LabError):
    """The admissible set of a primal problem is empty."""

    exit_code = 2
    kind = "infeasible"


class ConvexOrderError(InfeasibleError):
    """Marginals are not in convex order, so no martingale coupling exists."""

    kind = "not_convex_order"


class StructuralAssumptionError(LabError):
    """Moment constraints violate the strict sign condition on their ranges."""

    exit_code = 3
    kind = "structural_assumption"


class ShapeError(LabError):
    """Input arrays do not fit the grid they are attached to."""

    exit_code = 4
    kind = "shape"


class PreconditionError(ShapeError):
    kind = "precondition"


class NormalizationError(ShapeError):
    kind = "normalization"


class UnsupportedDimensionError(ShapeError):
    kind = "unsupported_dimension"


class RangeError(ShapeError):
    """A payoff table is not in the range of the trading map."""

    kind = "not_in_range"


class SolverFailureError(LabError):
    """The LP engine broke down numerically even after its fallback rule."""

    exit_code = 5
    kind = "solver_failure"
