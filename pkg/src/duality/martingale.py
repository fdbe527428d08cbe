"""The trading map ``T(gamma)(x, y) = gamma(x) . (x - y)`` and what it annihilates."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

import numpy as np

from src.duality.common import PayoffTable, TableLike, as_table, require_optimal, trading_table
from src.duality.programs import CouplingProgram, HedgeProgram
from src.errors import InfeasibleError, PreconditionError, RangeError, ShapeError
from src.lp import LpBuilder, LpStatus, Relation, Sense, solve
from src.measures import Coupling, SupportGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TradingStrategy:
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim == 1:
            g = g[:, None]
        if not np.all(np.isfinite(g)):
            raise ShapeError("trading strategy entries must be finite")
        object.__setattr__(self, "gamma", g)

    @property
    def norm(self) -> float:
        """Euclidean norm per point, maximised over points."""
        return float(np.linalg.norm(self.gamma, axis=1).max(initial=0.0))

    def __add__(self, other: "TradingStrategy") -> "TradingStrategy":
        return TradingStrategy(self.gamma + other.gamma)


def _strategy(grid: SupportGrid, gamma) -> np.ndarray:
    g = gamma.gamma if isinstance(gamma, TradingStrategy) else np.asarray(gamma, dtype=float)
    if g.ndim == 0:
        g = np.full((grid.m, grid.dim), float(g))
    if g.ndim == 1:
        g = g[:, None] if grid.dim == 1 else g[None, :]
    if g.shape != (grid.m, grid.dim):
        raise ShapeError("strategy does not match the X axis",
                         {"strategy": list(g.shape), "expected": [grid.m, grid.dim]})
    return g


def apply_T(grid: SupportGrid, gamma) -> PayoffTable:
    return PayoffTable(trading_table(grid, _strategy(grid, gamma)))


def martingale_defect(eta: Coupling) -> np.ndarray:
    """Per-x defect ``sum_j eta_ij (x_i - y_j)``; the pairing of ``eta`` with ``T``."""
    return -eta.martingale_defect()


def is_martingale(eta: Coupling, tol: float = 1e-9) -> bool:
    defect = np.linalg.norm(martingale_defect(eta), axis=1)
    return bool(np.all(defect <= tol * np.maximum(eta.x_marginal, 1.0)))


@dataclass
class GammaRecovery:
    gamma: np.ndarray
    residual: float
    xi_norm: float
    rows: List[Dict[str, float]] = field(default_factory=list)

    @property
    def bound_holds(self) -> bool:
        return all(r["gamma_abs"] <= r["bound"] * (1 + 1e-12) + 1e-12 for r in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma.tolist(),
            "residual": self.residual,
            "xi_weighted_norm": self.xi_norm,
            "rows": self.rows,
            "bound_holds": self.bound_holds,
        }


def recover_gamma(grid: SupportGrid, xi: TableLike, tol: float = 1e-10) -> GammaRecovery:
    """Invert ``T`` row by row and evaluate the finite-grid strategy estimate.

    For each x with largest displacement ``lam`` the estimate reads
    ``|gamma(x)| <= ||xi||_l (2 + 2|x| + lam) / lam``; it approaches ``||xi||_l``
    as ``lam`` grows.
    """
    table = as_table(xi, grid)
    if grid.n < 2:
        raise PreconditionError("recovering a strategy needs at least two y-points")
    scale = max(1.0, float(np.abs(table).max(initial=0.0)))
    gamma = np.zeros((grid.m, grid.dim))
    worst_row, worst = 0, 0.0
    for i in range(grid.m):
        D = grid.X[i][None, :] - grid.Y
        if np.linalg.matrix_rank(D) < grid.dim:
            raise PreconditionError("y-points do not span every direction around x",
                                    {"row": i, "x": grid.X[i].tolist()})
        gamma[i] = np.linalg.lstsq(D, table[i], rcond=None)[0]
        err = float(np.abs(D @ gamma[i] - table[i]).max()) / scale
        if err > worst:
            worst_row, worst = i, err
    if worst > tol:
        raise RangeError("payoff is not in the range of the trading map",
                         {"row": worst_row, "residual": worst})

    xi_norm = PayoffTable(table).weighted_norm(grid)
    rows = []
    for i in range(grid.m):
        disp = grid.Y - grid.X[i][None, :]
        lengths = np.linalg.norm(disp, axis=1)
        j = int(np.argmax(lengths))
        lam = float(lengths[j])
        direction = disp[j] / lam
        x_abs = float(np.linalg.norm(grid.X[i]))
        bound = xi_norm * (2.0 + 2.0 * x_abs + lam) / lam
        rows.append({"x": x_abs if grid.dim > 1 else float(grid.X[i, 0]), "lambda": lam,
                     "gamma_abs": float(abs(gamma[i] @ direction)),
                     "bound": bound, "slack_to_norm": bound - xi_norm})
    return GammaRecovery(gamma=gamma, residual=worst, xi_norm=xi_norm, rows=rows)


@dataclass
class MartingaleSuperhedge:
    value: float
    gamma: np.ndarray
    primal: float
    coupling: Coupling

    @property
    def gap(self) -> float:
        return abs(self.value - self.primal)

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "primal": self.primal, "gap": self.gap,
                "gamma": self.gamma.tolist(), "coupling": self.coupling.triples()}


def superhedge_martingale(grid: SupportGrid, payoff: TableLike, solver=None) -> MartingaleSuperhedge:
    """``min c`` with ``c l + T(gamma) >= a`` against ``max eta(a)`` over martingale ``eta(l) = 1``.

    ``gamma`` is whichever optimiser the solver lands on. Rows where the
    payoff leaves slack admit many strategies, so ``a = x - y`` may come back
    with ``gamma != 1`` on some rows while the value is still 0.
    """
    if not grid.same_axes():
        raise PreconditionError("martingale superhedging needs X = Y")
    a = as_table(payoff, grid)
    unit = grid.ell

    dual = HedgeProgram(grid, dynamic=True, statics=False).dominate(a, unit=unit)
    dsol = require_optimal(solve(dual.build(), solver), "martingale superhedge")
    hedge = dual.hedge(dsol)

    primal = CouplingProgram(grid, Sense.MAX).objective(a).martingale().moment(unit, rhs=1.0)
    psol = require_optimal(solve(primal.build(), solver), "normalised martingale primal")
    return MartingaleSuperhedge(value=float(dsol.objective), gamma=hedge.gamma,
                                primal=float(psol.objective), coupling=primal.coupling(psol))


def reflection_closed(grid: SupportGrid, tol: float = 1e-9) -> bool:
    """Whether ``y in Y`` implies ``2x - y in Y`` for every x."""
    for i in range(grid.m):
        mirrored = 2.0 * grid.X[i][None, :] - grid.Y
        dist = np.abs(mirrored[:, None, :] - grid.Y[None, :, :]).max(axis=2).min(axis=1)
        if np.any(dist > tol):
            return False
    return True


def _row_guaranteed(x: float, ys: np.ndarray, tol: float) -> bool:
    mirrored = 2.0 * x - ys
    if np.all(np.abs(mirrored[:, None] - ys[None, :]).min(axis=1) <= tol):
        return True
    others = ys[np.abs(ys - x) > tol]
    return bool(np.all(2.0 + abs(x) + np.abs(others) <= 3.0 * np.abs(x - others) + tol))


def bound_guaranteed(grid: SupportGrid, tol: float = 1e-9) -> bool:
    """Whether every row forces the smallest dominating ``T(gamma)`` within ``3 ||a||_l``.

    A 1D row qualifies when Y is symmetric around x, or when every other
    ``y`` keeps ``2 + |x| + |y| <= 3 |x - y|``. Other grids can go well past
    3, e.g. ``X = {5}``, ``Y = {-100, 4, 6}`` reaches about 10.8.
    """
    if grid.dim != 1:
        return False
    ys = grid.Y[:, 0]
    return all(_row_guaranteed(float(x), ys, tol) for x in grid.X[:, 0])


@dataclass
class SupermartingaleDecomposition:
    gamma: np.ndarray
    norm: float
    a_norm: float
    reflection_closed: bool
    bound_guaranteed: bool = False
    tolerance: float = 1e-7

    @property
    def ratio(self) -> Optional[float]:
        return None if self.a_norm == 0 else self.norm / self.a_norm

    @property
    def bound_holds(self) -> bool:
        return self.norm <= 3.0 * self.a_norm + self.tolerance * max(1.0, self.a_norm)

    def to_dict(self) -> Dict[str, Any]:
        return {"gamma": self.gamma.tolist(), "norm": self.norm, "a_norm": self.a_norm,
                "ratio": self.ratio, "bound_holds": self.bound_holds,
                "reflection_closed": self.reflection_closed, "bound_guaranteed": self.bound_guaranteed}


def supermartingale_decompose(grid: SupportGrid, payoff: TableLike, solver=None) -> SupermartingaleDecomposition:
    """Smallest ``||T(gamma)||_l`` among strategies with ``T(gamma) >= a``.

    Where ``bound_guaranteed`` holds the result never exceeds ``3 ||a||_l``;
    elsewhere the ratio is reported as found.
    """
    a = as_table(payoff, grid)
    unit = grid.ell
    m, n, d = grid.m, grid.n, grid.dim
    builder = LpBuilder(Sense.MIN)
    gamma = builder.add_variables(m * d, lower=-np.inf).reshape(m, d)
    s = int(builder.add_variables(1, lower=0.0, cost=1.0)[0])
    for i in range(m):
        for j in range(n):
            coefs = list(grid.X[i] - grid.Y[j])
            builder.add_row(gamma[i], coefs, Relation.GE, a[i, j])
            builder.add_row(list(gamma[i]) + [s], coefs + [-unit[i, j]], Relation.LE, 0.0)
            builder.add_row(list(gamma[i]) + [s], coefs + [unit[i, j]], Relation.GE, 0.0)
    sol = solve(builder.build(), solver)
    if sol.status is LpStatus.INFEASIBLE:
        raise InfeasibleError("payoff is not dominated by any trading gain",
                              {"certificate": None if sol.certificate is None else sol.certificate.tolist()})
    sol = require_optimal(sol, "supermartingale decomposition")
    g = sol.x[gamma]
    norm = PayoffTable(trading_table(grid, g)).weighted_norm(grid)
    result = SupermartingaleDecomposition(gamma=g, norm=norm, a_norm=PayoffTable(a).weighted_norm(grid),
                                          reflection_closed=reflection_closed(grid),
                                          bound_guaranteed=bound_guaranteed(grid))
    if not result.bound_holds:
        if result.bound_guaranteed:
            logger.error(f"decomposition norm {norm:.6g} exceeds three times {result.a_norm:.6g}")
        else:
            logger.warning(f"decomposition norm {norm:.6g} exceeds three times {result.a_norm:.6g} "
                           f"on a grid without the spacing guarantee")
    return result
