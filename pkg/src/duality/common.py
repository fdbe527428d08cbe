"""Value types shared by the transport, constrained, martingale and mot modules."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import config_value
from src.errors import InfeasibleError, ShapeError, SolverFailureError
from src.lp import LpSolution, LpStatus
from src.measures import Coupling, DiscreteMeasure, SupportGrid


@dataclass(frozen=True)
class PayoffTable:
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise ShapeError("payoff tables are two-dimensional", {"ndim": arr.ndim})
        if not np.all(np.isfinite(arr)):
            raise ShapeError("payoff entries must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))

    def weighted_norm(self, grid: SupportGrid) -> float:
        return float((np.abs(self.values) / grid.ell).max(initial=0.0))

    def __add__(self, other: "PayoffTable") -> "PayoffTable":
        return PayoffTable(self.values + as_table(other))

    def __mul__(self, t: float) -> "PayoffTable":
        return PayoffTable(self.values * float(t))

    __rmul__ = __mul__


TableLike = Union[PayoffTable, np.ndarray, Sequence[Sequence[float]]]


def as_table(table: TableLike, grid: Optional[SupportGrid] = None) -> np.ndarray:
    values = table.values if isinstance(table, PayoffTable) else PayoffTable(np.asarray(table)).values
    if grid is not None and values.shape != grid.shape:
        raise ShapeError("payoff table does not match the grid",
                         {"table": list(values.shape), "grid": list(grid.shape)})
    return values


def trading_table(grid: SupportGrid, gamma: np.ndarray) -> np.ndarray:
    """``gamma(x_i) . (x_i - y_j)`` as an ``(m, n)`` table."""
    gamma = np.asarray(gamma, dtype=float).reshape(grid.m, grid.dim)
    return np.einsum("id,ijd->ij", gamma, -grid.displacement())


def outer_sum(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.asarray(h, dtype=float)[:, None] + np.asarray(g, dtype=float)[None, :]


@dataclass
class Hedge:
    cash: float
    h: np.ndarray
    g: np.ndarray
    gamma: np.ndarray
    moments: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zeta: Optional[np.ndarray] = None

    def table(self, grid: SupportGrid, moments: Sequence[np.ndarray] = (),
              unit: Optional[np.ndarray] = None) -> np.ndarray:
        """Pointwise value of ``cash*e + h(+)g + T(gamma) + sum a_k f_k + zeta``."""
        unit = np.ones(grid.shape) if unit is None else unit
        out = self.cash * unit + outer_sum(self.h, self.g) + trading_table(grid, self.gamma)
        for a, f in zip(self.moments, moments):
            out = out + a * f
        if self.zeta is not None:
            out = out + self.zeta
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cash": float(self.cash),
            "h": np.asarray(self.h).tolist(),
            "g": np.asarray(self.g).tolist(),
            "gamma": np.asarray(self.gamma).tolist(),
            "moments": np.asarray(self.moments).tolist(),
            "zeta": None if self.zeta is None else np.asarray(self.zeta).tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Hedge":
        zeta = data.get("zeta")
        return cls(
            cash=float(data["cash"]),
            h=np.asarray(data["h"], dtype=float),
            g=np.asarray(data["g"], dtype=float),
            gamma=np.asarray(data["gamma"], dtype=float),
            moments=np.asarray(data.get("moments", []), dtype=float),
            zeta=None if zeta is None else np.asarray(zeta, dtype=float),
        )


@dataclass
class Residuals:
    marginal: float = 0.0
    defect: float = 0.0
    moments: float = 0.0
    centering: float = 0.0
    domination: float = 0.0
    complementarity: float = 0.0
    lp: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "marginal": self.marginal,
            "defect": self.defect,
            "moments": self.moments,
            "centering": self.centering,
            "domination": self.domination,
            "complementarity": self.complementarity,
            "lp": self.lp,
        }


@dataclass
class DualityReport:
    mode: str
    primal: float
    dual: float
    coupling: Coupling
    hedge: Hedge
    residuals: Residuals
    payoff: np.ndarray
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return abs(self.primal - self.dual)

    @property
    def relative_gap(self) -> float:
        return self.gap / (1.0 + abs(self.primal))

    def strong_duality(self, tol: Optional[float] = None) -> bool:
        tol = config_value("tolerances", "duality_gap", 1e-7) if tol is None else tol
        return self.relative_gap <= tol

    def attained(self, tol: Optional[float] = None, cs_tol: Optional[float] = None) -> bool:
        tol = config_value("tolerances", "residual", 1e-9) if tol is None else tol
        cs_tol = config_value("tolerances", "complementarity", 1e-8) if cs_tol is None else cs_tol
        return self.residuals.domination <= tol and self.residuals.complementarity <= cs_tol

    def to_dict(self) -> Dict[str, Any]:
        return {
            "values": {"primal": self.primal, "dual": self.dual, "gap": self.gap},
            "witnesses": {"coupling": self.coupling.triples(), "hedge": self.hedge.to_dict()},
            "diagnostics": {"residuals": self.residuals.to_dict(), **self.extras},
        }


@dataclass
class PolarCertificate:
    mode: str
    cell_values: np.ndarray
    tolerance: float
    kellerer_a: List[int] = field(default_factory=list)
    kellerer_b: List[int] = field(default_factory=list)
    cover_exact: Optional[bool] = None
    touching_points: List[float] = field(default_factory=list)
    rectangles: List[Dict[str, Any]] = field(default_factory=list)
    witness: Optional[np.ndarray] = None
    witness_min: Optional[float] = None
    witness_value: Optional[float] = None

    @property
    def scanned(self) -> np.ndarray:
        return ~np.isnan(self.cell_values)

    @property
    def polar_mask(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.scanned & (self.cell_values <= self.tolerance)

    @property
    def polar_cells(self) -> List[Tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.polar_mask))]

    def to_dict(self) -> Dict[str, Any]:
        values = np.where(np.isnan(self.cell_values), None, self.cell_values).tolist()
        return {
            "mode": self.mode,
            "polar_cells": [list(c) for c in self.polar_cells],
            "cell_values": values,
            "tolerance": self.tolerance,
            "kellerer_a": self.kellerer_a,
            "kellerer_b": self.kellerer_b,
            "cover_exact": self.cover_exact,
            "touching_points": self.touching_points,
            "rectangles": self.rectangles,
            "witness": None if self.witness is None else self.witness.tolist(),
            "witness_min": self.witness_min,
            "witness_value": self.witness_value,
        }


def require_marginals(grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    grid.check_measures(mu, nu)
    mu.require_probability("mu")
    nu.require_probability("nu")


def require_optimal(sol: LpSolution, what: str) -> LpSolution:
    if sol.status is LpStatus.OPTIMAL:
        return sol
    if sol.status is LpStatus.INFEASIBLE:
        certificate = None if sol.certificate is None else sol.certificate.tolist()
        raise InfeasibleError(f"{what} is infeasible", {"certificate": certificate})
    raise SolverFailureError(f"{what} is unbounded", {"ray": None if sol.certificate is None
                                                      else sol.certificate.tolist()})


def assemble_report(mode: str, grid: SupportGrid, mu: DiscreteMeasure, nu: DiscreteMeasure,
                    payoff: np.ndarray, primal_sol: LpSolution, coupling: Coupling,
                    dual_sol: LpSolution, hedge: Hedge, moments: Sequence[np.ndarray] = (),
                    extras: Optional[Dict[str, Any]] = None) -> DualityReport:
    """Primal and dual witnesses plus every residual the report contract names."""
    eta = coupling.dense()
    slack = hedge.table(grid, moments) - payoff
    residuals = Residuals(
        marginal=float(max(np.abs(coupling.x_marginal - mu.weights).max(),
                           np.abs(coupling.y_marginal - nu.weights).max())),
        defect=float(np.abs(coupling.martingale_defect()).max(initial=0.0)),
        moments=float(max((abs(np.sum(eta * f)) for f in moments), default=0.0)),
        centering=float(abs(mu.integrate(hedge.h)) + abs(nu.integrate(hedge.g))),
        domination=float(max(-slack.min(initial=0.0), 0.0)),
        complementarity=float(abs(np.sum(eta * slack))),
        lp={"primal": primal_sol.residuals.to_dict() if primal_sol.residuals else {},
            "dual": dual_sol.residuals.to_dict() if dual_sol.residuals else {}},
    )
    return DualityReport(mode=mode, primal=float(primal_sol.objective), dual=float(hedge.cash),
                         coupling=coupling, hedge=hedge, residuals=residuals, payoff=payoff,
                         extras=dict(extras or {}))
