"""Grids, discrete measures, couplings, potential functions and convex order."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union
import logging

import numpy as np
from scipy import sparse

from src.config import config_value
from src.errors import (
    NormalizationError,
    PreconditionError,
    ShapeError,
    UnsupportedDimensionError,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, List[float], List[List[float]]]


def as_points(points: ArrayLike, dim: Optional[int] = None) -> np.ndarray:
    """Coerce a list of scalars or d-vectors into an ``(k, d)`` float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ShapeError("points must be a non-empty list of scalars or d-vectors",
                         {"shape": list(arr.shape)})
    if dim is not None and arr.shape[1] != dim:
        raise ShapeError("point dimension mismatch", {"expected": dim, "got": arr.shape[1]})
    if not np.all(np.isfinite(arr)):
        raise ShapeError("grid points must be finite")
    return arr


def ell(points: np.ndarray) -> np.ndarray:
    """Single-axis order unit ``1 + |t|`` (Euclidean norm per point)."""
    return 1.0 + np.linalg.norm(points, axis=1)


class Axis(str, Enum):
    X = "X"
    Y = "Y"


@dataclass(frozen=True)
class SupportGrid:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", as_points(self.X))
        object.__setattr__(self, "Y", as_points(self.Y, self.X.shape[1]))
        for name, pts in (("X", self.X), ("Y", self.Y)):
            if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
                raise ShapeError(f"grid axis {name} has repeated points")

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.m, self.n

    @property
    def ell_x(self) -> np.ndarray:
        return ell(self.X)

    @property
    def ell_y(self) -> np.ndarray:
        return ell(self.Y)

    @property
    def ell(self) -> np.ndarray:
        """``l(x, y) = (1+|x|) + (1+|y|)`` as an ``(m, n)`` table."""
        return self.ell_x[:, None] + self.ell_y[None, :]

    def displacement(self) -> np.ndarray:
        """``(m, n, d)`` array of ``y_j - x_i``."""
        return self.Y[None, :, :] - self.X[:, None, :]

    def same_axes(self, tol: float = 0.0) -> bool:
        return self.X.shape == self.Y.shape and bool(np.all(np.abs(self.X - self.Y) <= tol))

    def measure(self, weights: ArrayLike, axis: Axis) -> "DiscreteMeasure":
        points = self.X if Axis(axis) is Axis.X else self.Y
        return DiscreteMeasure(points, np.asarray(weights, dtype=float), Axis(axis))

    def check_measures(self, mu: "DiscreteMeasure", nu: "DiscreteMeasure") -> None:
        for name, meas, pts in (("mu", mu, self.X), ("nu", nu, self.Y)):
            if meas.points.shape != pts.shape or not np.allclose(meas.points, pts, rtol=0, atol=1e-12):
                raise ShapeError(f"{name} is not supported on the matching grid axis",
                                 {"measure_points": meas.size, "axis_points": pts.shape[0]})

    def hull_contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Which rows of ``points`` lie in ``conv(Y)`` (1D exact, d>1 by LP)."""
        if self.dim == 1:
            lo, hi = self.Y[:, 0].min(), self.Y[:, 0].max()
            return (points[:, 0] >= lo - tol) & (points[:, 0] <= hi + tol)
        from src.lp import LpBuilder, Relation, Sense, solve

        inside = []
        for p in points:
            builder = LpBuilder(Sense.MIN)
            w = builder.add_variables(self.n, lower=0.0)
            builder.add_row(w, np.ones(self.n), Relation.EQ, 1.0)
            for r in range(self.dim):
                builder.add_row(w, self.Y[:, r], Relation.EQ, p[r])
            inside.append(solve(builder.build()).is_optimal)
        return np.asarray(inside, dtype=bool)

    def to_dict(self) -> Dict[str, Any]:
        return {"X": self.X.tolist(), "Y": self.Y.tolist()}


@dataclass(frozen=True)
class DiscreteMeasure:
    points: np.ndarray
    weights: np.ndarray
    axis: Axis = Axis.X
    signed: bool = False

    def __post_init__(self):
        pts = as_points(self.points)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise ShapeError("measure weights do not match its points",
                             {"points": pts.shape[0], "weights": w.shape[0]})
        if not np.all(np.isfinite(w)):
            raise ShapeError("measure weights must be finite")
        if not self.signed and np.any(w < 0):
            raise ShapeError("measure weights must be nonnegative",
                             {"index": int(np.flatnonzero(w < 0)[0])})
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, point, axis: Axis = Axis.X) -> "DiscreteMeasure":
        return cls(as_points([point] if np.ndim(point) <= 1 else point), np.ones(1), axis)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def barycenter(self) -> np.ndarray:
        total = self.mass
        if total == 0:
            return np.zeros(self.dim)
        return self.weights @ self.points / total

    @property
    def weighted_mass(self) -> float:
        return float(self.weights @ ell(self.points))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    @property
    def positive_part(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, np.maximum(self.weights, 0.0), self.axis)

    @property
    def negative_part(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, np.maximum(-self.weights, 0.0), self.axis)

    def is_probability(self, tol: float = 1e-9) -> bool:
        return not self.signed and abs(self.mass - 1.0) <= tol

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))

    def require_probability(self, name: str, tol: float = 1e-9) -> None:
        if self.mass <= 0:
            raise PreconditionError(f"{name} has zero mass")
        if not self.is_probability(tol):
            raise NormalizationError(f"{name} is not a probability measure", {"mass": self.mass})


@dataclass(frozen=True)
class Coupling:
    """Nonnegative weights on the cells of a grid."""

    grid: SupportGrid
    weights: sparse.csr_matrix = field(repr=False)

    def __post_init__(self):
        w = sparse.csr_matrix(self.weights, dtype=float)
        if w.shape != self.grid.shape:
            raise ShapeError("coupling shape does not match grid",
                             {"coupling": list(w.shape), "grid": list(self.grid.shape)})
        w.eliminate_zeros()
        if w.nnz and w.data.min() < 0:
            raise ShapeError("coupling entries must be nonnegative")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_dense(cls, grid: SupportGrid, table: ArrayLike, clip: float = 0.0) -> "Coupling":
        arr = np.asarray(table, dtype=float).reshape(grid.shape)
        if clip > 0:
            arr = np.where((arr < 0) & (arr >= -clip), 0.0, arr)
        return cls(grid, sparse.csr_matrix(arr))

    @classmethod
    def from_triples(cls, grid: SupportGrid, triples) -> "Coupling":
        rows, cols, vals = zip(*triples) if len(triples) else ((), (), ())
        return cls(grid, sparse.coo_matrix((vals, (rows, cols)), shape=grid.shape).tocsr())

    @classmethod
    def zeros(cls, grid: SupportGrid) -> "Coupling":
        return cls(grid, sparse.csr_matrix(grid.shape))

    def dense(self) -> np.ndarray:
        return self.weights.toarray()

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def x_marginal(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).reshape(-1)

    @property
    def y_marginal(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=0)).reshape(-1)

    def martingale_defect(self) -> np.ndarray:
        """``(m, d)`` array of ``sum_j eta_ij (y_j - x_i)``."""
        eta = self.dense()
        return eta @ self.grid.Y - self.x_marginal[:, None] * self.grid.X

    def expect(self, table: ArrayLike) -> float:
        return float(np.sum(self.dense() * np.asarray(table, dtype=float)))

    def triples(self) -> List[List[float]]:
        coo = self.weights.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order]

    def __add__(self, other: "Coupling") -> "Coupling":
        return Coupling(self.grid, self.weights + other.weights)


def potential(m: DiscreteMeasure, x: float) -> float:
    """``u_m(x) = sum_i w_i |x - t_i|`` for a 1D measure."""
    if m.dim != 1:
        raise UnsupportedDimensionError("potential functions are defined in dimension 1 only",
                                        {"dim": m.dim})
    return float(m.weights @ np.abs(float(x) - m.points[:, 0]))


def potentials(m: DiscreteMeasure, xs: ArrayLike) -> np.ndarray:
    if m.dim != 1:
        raise UnsupportedDimensionError("potential functions are defined in dimension 1 only",
                                        {"dim": m.dim})
    xs = np.asarray(xs, dtype=float).reshape(-1)
    return np.abs(xs[:, None] - m.points[None, :, 0]) @ m.weights


@dataclass
class ConvexOrderResult:
    ordered: bool
    method: str
    violation_point: Optional[float] = None
    violation: float = 0.0
    barycenter_gap: float = 0.0
    coupling: Optional[Coupling] = None
    certificate: Optional[np.ndarray] = None

    def __bool__(self) -> bool:
        return self.ordered

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "ordered": self.ordered,
            "method": self.method,
            "violation_point": self.violation_point,
            "violation": self.violation,
            "barycenter_gap": self.barycenter_gap,
        }
        if self.coupling is not None:
            out["coupling"] = self.coupling.triples()
        if self.certificate is not None:
            out["certificate"] = self.certificate.tolist()
        return out


def _order_tolerance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    pts = np.concatenate([mu.points[mu.support, 0], nu.points[nu.support, 0]])
    diameter = float(pts.max() - pts.min()) if pts.size else 0.0
    base = config_value("tolerances", "convex_order", 1e-10)
    return base * max(mu.mass, nu.mass) * max(diameter, 1.0)


def check_convex_order_potential(mu: DiscreteMeasure, nu: DiscreteMeasure,
                                 tol: Optional[float] = None) -> ConvexOrderResult:
    """1D convex order via equal barycenters plus potential dominance ``u_mu <= u_nu``.

    ``u_mu - u_nu`` is piecewise linear with kinks at atoms only, so checking the
    union of supports and both barycenters is exhaustive. The violation point
    returned is where ``u_mu - u_nu`` is largest.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise UnsupportedDimensionError("potential order check needs 1D measures")
    mu.require_probability("mu")
    nu.require_probability("nu")
    tol = _order_tolerance(mu, nu) if tol is None else tol
    bary_tol = config_value("tolerances", "barycenter", 1e-9)

    candidates = np.unique(np.concatenate([
        mu.points[mu.support, 0], nu.points[nu.support, 0],
        mu.barycenter, nu.barycenter,
    ]))
    diff = potentials(mu, candidates) - potentials(nu, candidates)
    worst = int(np.argmax(diff))
    bary_gap = float(np.abs(mu.barycenter - nu.barycenter).max())
    ordered = bary_gap <= bary_tol and diff[worst] <= tol
    result = ConvexOrderResult(ordered=ordered, method="potential", violation=float(max(diff[worst], 0.0)),
                               barycenter_gap=bary_gap)
    if not ordered:
        result.violation_point = float(candidates[worst])
    return result


def check_convex_order_lp(mu: DiscreteMeasure, nu: DiscreteMeasure,
                          solver=None) -> ConvexOrderResult:
    """Convex order in any dimension: feasibility of the martingale-coupling LP."""
    from src.duality.programs import CouplingProgram
    from src.lp import LpStatus, Sense, solve

    mu.require_probability("mu")
    nu.require_probability("nu")
    grid = SupportGrid(mu.points, nu.points)
    program = CouplingProgram(grid, Sense.MAX)
    program.x_marginal(mu.weights)
    program.y_marginal(nu.weights)
    program.martingale()
    sol = solve(program.build(), solver)
    bary_gap = float(np.abs(mu.barycenter - nu.barycenter).max())
    if sol.status is LpStatus.OPTIMAL:
        return ConvexOrderResult(ordered=True, method="lp", coupling=program.coupling(sol),
                                 barycenter_gap=bary_gap)
    logger.info("Martingale coupling LP is infeasible; marginals are not in convex order")
    return ConvexOrderResult(ordered=False, method="lp", certificate=sol.certificate,
                             barycenter_gap=bary_gap)


def split_coupling(eta: Coupling, alpha: DiscreteMeasure, beta: DiscreteMeasure,
                   tol: float = 1e-9) -> Tuple[Coupling, Coupling]:
    """Split a martingale coupling along ``alpha + beta = eta_x`` row by row."""
    a, b = np.asarray(alpha.weights), np.asarray(beta.weights)
    eta_x = eta.x_marginal
    if a.shape != eta_x.shape or b.shape != eta_x.shape:
        raise ShapeError("split measures must live on the coupling's X axis")
    mismatch = float(np.abs(a + b - eta_x).max())
    if mismatch > tol * max(1.0, eta.mass):
        raise PreconditionError("alpha + beta does not match the x-marginal",
                                {"max_mismatch": mismatch})
    defect = np.abs(eta.martingale_defect()).max(axis=1)
    if np.any(defect > tol * np.maximum(eta_x, 1.0)):
        raise PreconditionError("coupling has a nonzero martingale defect",
                                {"row": int(np.argmax(defect)), "defect": float(defect.max())})
    total = a + b
    density = np.divide(a, total, out=np.zeros_like(a), where=total > 0)
    part = sparse.diags(density) @ eta.weights
    rest = eta.weights - part
    rest.data = np.maximum(rest.data, 0.0)
    return Coupling(eta.grid, part), Coupling(eta.grid, rest)
