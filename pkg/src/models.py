"""Problem and report file schemas."""

from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.errors import ShapeError
from src.measures import Axis, DiscreteMeasure, SupportGrid

Mode = Literal["ot", "cot", "mot", "order", "envelope", "polar", "gap", "normalize", "quotient"]
Point = Union[float, List[float]]


class GridSpec(BaseModel):
    X: List[Point]
    Y: List[Point]


class ProblemFile(BaseModel):
    """One problem instance; ``mode`` selects which fields are read."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    schema_version: int = Field(1, alias="schema")
    mode: Mode
    grid: Optional[GridSpec] = None
    mu: Optional[List[float]] = None
    nu: Optional[List[float]] = None
    payoff: Optional[List[List[float]]] = None
    constraints: List[List[List[float]]] = Field(default_factory=list)
    function: Optional[List[float]] = None
    alpha: Optional[List[float]] = None
    parameters: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("schema_version")
    @classmethod
    def known_schema(cls, v: int) -> int:
        if v != 1:
            raise ValueError(f"unsupported schema version {v}")
        return v

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ShapeError(f"problem of mode '{self.mode}' is missing fields", {"missing": missing})

    def support_grid(self) -> SupportGrid:
        self.require("grid")
        return SupportGrid(self.grid.X, self.grid.Y)

    def marginals(self, grid: SupportGrid) -> Tuple[DiscreteMeasure, DiscreteMeasure]:
        self.require("mu", "nu")
        mu = grid.measure(self.mu, Axis.X)
        nu = grid.measure(self.nu, Axis.Y)
        grid.check_measures(mu, nu)
        return mu, nu

    def payoff_table(self, grid: SupportGrid) -> np.ndarray:
        self.require("payoff")
        return _table(self.payoff, grid, "payoff")

    def constraint_tables(self, grid: SupportGrid) -> List[np.ndarray]:
        return [_table(f, grid, f"constraint {k + 1}") for k, f in enumerate(self.constraints)]


def _table(rows: List[List[float]], grid: SupportGrid, name: str) -> np.ndarray:
    try:
        table = np.asarray(rows, dtype=float)
    except ValueError as e:
        raise ShapeError(f"{name} is not a rectangular matrix", {"reason": str(e)})
    if table.shape != grid.shape:
        raise ShapeError(f"{name} does not match the grid",
                         {"table": list(table.shape), "grid": list(grid.shape)})
    return table


class GapParameters(BaseModel):
    n: int = Field(1001, ge=2)
    shifts: List[int] = Field(default_factory=lambda: [1, 2, 5])
    hedge_norms: Tuple[float, float, float] = (10.0, 10.0, 10.0)


class NormalizeParameters(BaseModel):
    kind: Literal["ot", "mot"]
    b: List[float]
    c: List[float]
    n: Optional[List[List[float]]] = None
    radius: Optional[float] = None
    gamma: Optional[List[Point]] = None
    anchor: Optional[Point] = None


class PolarParameters(BaseModel):
    kind: Literal["ot", "mot"] = "ot"
    full_scan: bool = False


class CotParameters(BaseModel):
    quasi_sure: bool = False


class QuotientParameters(BaseModel):
    weighted: bool = False


class ErrorInfo(BaseModel):
    kind: str
    message: str
    exit_code: int
    details: Dict[str, Any] = Field(default_factory=dict)


class ReportFile(BaseModel):
    """What a command emits; ``verify`` reads it back."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    mode: str
    command: str
    status: Literal["ok", "error", "failed"]
    values: Dict[str, Any] = Field(default_factory=dict)
    witnesses: Dict[str, Any] = Field(default_factory=dict)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    error: Optional[ErrorInfo] = None

    def dump(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True)
