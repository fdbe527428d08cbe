"""LP builders over coupling space and hedge space.

Every primal problem in the lab is "maximise or minimise a linear functional of
a nonnegative table ``eta`` over X x Y subject to marginal, martingale and
moment rows"; every dual problem is "find the cheapest cash plus static plus
dynamic hedge dominating a payoff". These two builders assemble both families.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.lp import LinearProgram, LpBuilder, LpSolution, Relation, Sense
from src.measures import Coupling, SupportGrid


class CouplingProgram:
    """Variables ``eta_ij >= 0`` indexed row-major over the grid."""

    def __init__(self, grid: SupportGrid, sense: Sense = Sense.MAX):
        self.grid = grid
        self.builder = LpBuilder(sense)
        self.eta = self.builder.add_variables(grid.m * grid.n, lower=0.0)
        self._cells = self.eta.reshape(grid.m, grid.n)
        self.scale_var: Optional[int] = None

    def objective(self, table: np.ndarray) -> "CouplingProgram":
        self.builder.set_costs(self.eta, np.asarray(table, dtype=float).reshape(-1))
        return self

    def add_scale(self, lower: float = 0.0) -> int:
        """Free mass variable ``t`` so that marginals read ``t * mu``, ``t * nu``."""
        self.scale_var = int(self.builder.add_variables(1, lower=lower)[0])
        return self.scale_var

    def x_marginal(self, weights: np.ndarray, scaled: bool = False) -> "CouplingProgram":
        for i, w in enumerate(np.asarray(weights, dtype=float)):
            idx = list(self._cells[i])
            coefs = [1.0] * self.grid.n
            if scaled:
                idx.append(self.scale_var)
                coefs.append(-w)
            self.builder.add_row(idx, coefs, Relation.EQ, 0.0 if scaled else w)
        return self

    def y_marginal(self, weights: np.ndarray, scaled: bool = False) -> "CouplingProgram":
        for j, w in enumerate(np.asarray(weights, dtype=float)):
            idx = list(self._cells[:, j])
            coefs = [1.0] * self.grid.m
            if scaled:
                idx.append(self.scale_var)
                coefs.append(-w)
            self.builder.add_row(idx, coefs, Relation.EQ, 0.0 if scaled else w)
        return self

    def martingale(self) -> "CouplingProgram":
        disp = self.grid.displacement()
        for i in range(self.grid.m):
            for r in range(self.grid.dim):
                self.builder.add_row(self._cells[i], disp[i, :, r], Relation.EQ, 0.0)
        return self

    def moment(self, table: np.ndarray, rhs: float = 0.0,
               relation: Relation = Relation.EQ) -> "CouplingProgram":
        self.builder.add_row(self.eta, np.asarray(table, dtype=float).reshape(-1), relation, rhs)
        return self

    def build(self) -> LinearProgram:
        return self.builder.build()

    def coupling(self, sol: LpSolution) -> Coupling:
        return Coupling.from_dense(self.grid, sol.x[self.eta], clip=1e-12)


@dataclass
class HedgeLayout:
    cash: int
    h: np.ndarray
    g: np.ndarray
    gamma: np.ndarray
    moments: np.ndarray


class HedgeProgram:
    """Variables cash, ``h`` over X, ``g`` over Y, ``gamma`` per X point and moment multipliers.

    Domination rows read ``cash * e + h_i + g_j + gamma_i . (x_i - y_j)
    + sum_k a_k f_k(i, j) >= f(i, j)`` with order unit ``e`` (1 or ``l``).
    """

    def __init__(self, grid: SupportGrid, n_moments: int = 0, dynamic: bool = False,
                 statics: bool = True, sense: Sense = Sense.MIN):
        self.grid = grid
        self.builder = LpBuilder(sense)
        cash = int(self.builder.add_variables(1, lower=-np.inf, cost=1.0)[0])
        h = self.builder.add_variables(grid.m, lower=-np.inf) if statics else np.zeros(0, dtype=int)
        g = self.builder.add_variables(grid.n, lower=-np.inf) if statics else np.zeros(0, dtype=int)
        gamma = (self.builder.add_variables(grid.m * grid.dim, lower=-np.inf).reshape(grid.m, grid.dim)
                 if dynamic else np.zeros((0, grid.dim), dtype=int))
        moments = self.builder.add_variables(n_moments, lower=-np.inf)
        self.layout = HedgeLayout(cash=cash, h=h, g=g, gamma=gamma, moments=moments)

    def _row(self, i: int, j: int, unit: float, moments: Sequence[np.ndarray], sign: float = 1.0):
        lay = self.layout
        idx = [lay.cash]
        coefs = [unit]
        if lay.h.size:
            idx += [lay.h[i], lay.g[j]]
            coefs += [sign, sign]
        if lay.gamma.size:
            idx += list(lay.gamma[i])
            coefs += list(sign * (self.grid.X[i] - self.grid.Y[j]))
        for k, table in enumerate(moments):
            idx.append(lay.moments[k])
            coefs.append(sign * table[i, j])
        return idx, coefs

    def dominate(self, payoff: np.ndarray, unit: Optional[np.ndarray] = None,
                 moments: Sequence[np.ndarray] = (), cells: Optional[np.ndarray] = None) -> "HedgeProgram":
        """``hedge >= payoff`` on every cell where ``cells`` is true (default all)."""
        payoff = np.asarray(payoff, dtype=float)
        unit = np.ones(self.grid.shape) if unit is None else unit
        for i in range(self.grid.m):
            for j in range(self.grid.n):
                if cells is not None and not cells[i, j]:
                    continue
                idx, coefs = self._row(i, j, unit[i, j], moments)
                self.builder.add_row(idx, coefs, Relation.GE, payoff[i, j])
        return self

    def band(self, payoff: np.ndarray, unit: Optional[np.ndarray] = None) -> "HedgeProgram":
        """``-cash*e <= payoff - h(+)g <= cash*e`` on every cell."""
        payoff = np.asarray(payoff, dtype=float)
        unit = np.ones(self.grid.shape) if unit is None else unit
        for i in range(self.grid.m):
            for j in range(self.grid.n):
                idx, coefs = self._row(i, j, unit[i, j], ())
                self.builder.add_row(idx, coefs, Relation.GE, payoff[i, j])
                idx, coefs = self._row(i, j, unit[i, j], (), sign=-1.0)
                self.builder.add_row(idx, coefs, Relation.GE, -payoff[i, j])
        return self

    def center(self, mu: np.ndarray, nu: np.ndarray) -> "HedgeProgram":
        """Two equality rows ``mu(h) = 0`` and ``nu(g) = 0``."""
        self.builder.add_row(self.layout.h, mu, Relation.EQ, 0.0)
        self.builder.add_row(self.layout.g, nu, Relation.EQ, 0.0)
        return self

    def cap_cash(self, value: float) -> "HedgeProgram":
        self.builder.add_row([self.layout.cash], [1.0], Relation.LE, value)
        return self

    def minimise_moment_norm(self) -> "HedgeProgram":
        """Replace the objective by ``sum_k |a_k|`` via epigraph variables."""
        lay = self.layout
        self.builder.set_costs([lay.cash], [0.0])
        t = self.builder.add_variables(lay.moments.size, lower=0.0, cost=1.0)
        for k in range(lay.moments.size):
            self.builder.add_row([t[k], lay.moments[k]], [1.0, -1.0], Relation.GE, 0.0)
            self.builder.add_row([t[k], lay.moments[k]], [1.0, 1.0], Relation.GE, 0.0)
        return self

    def build(self) -> LinearProgram:
        return self.builder.build()

    def hedge(self, sol: LpSolution):
        from src.duality.common import Hedge

        lay = self.layout
        x = sol.x
        return Hedge(
            cash=float(x[lay.cash]),
            h=x[lay.h] if lay.h.size else np.zeros(self.grid.m),
            g=x[lay.g] if lay.g.size else np.zeros(self.grid.n),
            gamma=x[lay.gamma] if lay.gamma.size else np.zeros((self.grid.m, self.grid.dim)),
            moments=x[lay.moments],
            zeta=np.zeros(self.grid.shape),
        )
