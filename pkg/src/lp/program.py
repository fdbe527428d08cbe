"""Natural-form linear programs and their solutions.

Programs are immutable values: objective, a sparse CSR constraint matrix with
one relation and right-hand side per row, and per-variable bounds that may be
infinite. Solvers convert to standard form internally.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from src.errors import ShapeError


class Sense(str, Enum):
    MIN = "min"
    MAX = "max"

    @property
    def sign(self) -> float:
        return 1.0 if self is Sense.MIN else -1.0


class Relation(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    matrix: sparse.csr_matrix
    relations: Tuple[Relation, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sense: Sense = Sense.MIN

    def __post_init__(self):
        n = self.objective.shape[0]
        m = len(self.relations)
        if self.matrix.shape != (m, n):
            raise ShapeError(
                "constraint matrix does not match program dimensions",
                {"matrix": list(self.matrix.shape), "rows": m, "variables": n},
            )
        if self.rhs.shape != (m,) or self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ShapeError("rhs or bound vectors have the wrong length")
        if not (np.all(np.isfinite(self.objective)) and np.all(np.isfinite(self.rhs))
                and np.all(np.isfinite(self.matrix.data))):
            raise ShapeError("linear program coefficients must be finite")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ShapeError("variable bounds must not be NaN")
        bad = np.flatnonzero(self.lower > self.upper)
        if bad.size:
            raise ShapeError("variable lower bound exceeds upper bound", {"variable": int(bad[0])})

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def num_rows(self) -> int:
        return len(self.relations)

    def with_objective(self, objective: np.ndarray, sense: Optional[Sense] = None) -> "LinearProgram":
        return replace(self, objective=np.asarray(objective, dtype=float),
                       sense=self.sense if sense is None else sense)

    def value(self, x: np.ndarray) -> float:
        return float(self.objective @ x)


@dataclass(frozen=True)
class ResidualReport:
    """Scaled residuals of a solution; ``None`` where a check does not apply."""

    primal: Optional[float] = None
    dual: Optional[float] = None
    complementarity: Optional[float] = None
    gap: Optional[float] = None
    certificate: Optional[float] = None

    def worst(self) -> float:
        values = [v for v in (self.primal, self.dual, self.complementarity, self.gap) if v is not None]
        return max(values) if values else 0.0

    def to_dict(self) -> dict:
        return {
            "primal": self.primal,
            "dual": self.dual,
            "complementarity": self.complementarity,
            "gap": self.gap,
            "certificate": self.certificate,
        }


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    objective: Optional[float] = None
    residuals: Optional[ResidualReport] = None
    # Farkas multipliers (rows) when infeasible, improving ray (variables) when unbounded
    certificate: Optional[np.ndarray] = None
    iterations: int = 0
    backend: str = "simplex"

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass
class LpBuilder:
    """Incrementally assembles a :class:`LinearProgram`.

    Variables are added in blocks and addressed by the integer indices the
    block call returns; rows are sparse (indices, coefficients) pairs.
    """

    sense: Sense = Sense.MIN
    _costs: List[float] = field(default_factory=list)
    _lower: List[float] = field(default_factory=list)
    _upper: List[float] = field(default_factory=list)
    _rows: List[int] = field(default_factory=list)
    _cols: List[int] = field(default_factory=list)
    _data: List[float] = field(default_factory=list)
    _relations: List[Relation] = field(default_factory=list)
    _rhs: List[float] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self._costs)

    @property
    def num_rows(self) -> int:
        return len(self._relations)

    def add_variables(self, count: int, lower: float = 0.0, upper: float = np.inf,
                      cost=0.0) -> np.ndarray:
        start = self.num_vars
        costs = np.broadcast_to(np.asarray(cost, dtype=float), (count,))
        self._costs.extend(costs.tolist())
        self._lower.extend([float(lower)] * count)
        self._upper.extend([float(upper)] * count)
        return np.arange(start, start + count)

    def set_costs(self, indices: Sequence[int], costs) -> None:
        costs = np.broadcast_to(np.asarray(costs, dtype=float), (len(indices),))
        for idx, c in zip(indices, costs):
            self._costs[int(idx)] = float(c)

    def add_row(self, indices: Iterable[int], coefficients: Iterable[float],
                relation: Relation, rhs: float) -> int:
        row = self.num_rows
        for idx, coef in zip(indices, coefficients):
            if coef != 0.0:
                self._rows.append(row)
                self._cols.append(int(idx))
                self._data.append(float(coef))
        self._relations.append(Relation(relation))
        self._rhs.append(float(rhs))
        return row

    def build(self) -> LinearProgram:
        n, m = self.num_vars, self.num_rows
        matrix = sparse.coo_matrix(
            (np.asarray(self._data, dtype=float), (np.asarray(self._rows, dtype=int),
                                                   np.asarray(self._cols, dtype=int))),
            shape=(m, n),
        ).tocsr()
        matrix.sum_duplicates()
        return LinearProgram(
            objective=np.asarray(self._costs, dtype=float),
            matrix=matrix,
            relations=tuple(self._relations),
            rhs=np.asarray(self._rhs, dtype=float),
            lower=np.asarray(self._lower, dtype=float),
            upper=np.asarray(self._upper, dtype=float),
            sense=self.sense,
        )
