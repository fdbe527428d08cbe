import numpy as np
from scipy.optimize import linprog

from src.errors import SolverFailureError
from src.lp.base_solver import LpSolver
from src.lp.program import LinearProgram, LpSolution, LpStatus, Relation
from src.lp.verify import verify


class HighsSolver(LpSolver):
    """scipy's HiGHS backend, used as an independent oracle.

    Values and row multipliers are returned (mapped to the lab's sign
    convention) but no infeasibility or unboundedness certificates.
    """

    name = "highs"

    def solve(self, lp: LinearProgram) -> LpSolution:
        sigma = lp.sense.sign
        le = np.array([r is Relation.LE for r in lp.relations], dtype=bool)
        ge = np.array([r is Relation.GE for r in lp.relations], dtype=bool)
        eq = np.array([r is Relation.EQ for r in lp.relations], dtype=bool)
        ineq = le | ge
        flip = np.where(ge, -1.0, 1.0)

        A_ub = lp.matrix[ineq].multiply(flip[ineq][:, None]).tocsr() if ineq.any() else None
        b_ub = (lp.rhs * flip)[ineq] if ineq.any() else None
        A_eq = lp.matrix[eq] if eq.any() else None
        b_eq = lp.rhs[eq] if eq.any() else None
        bounds = [(None if np.isinf(l) else l, None if np.isinf(u) else u)
                  for l, u in zip(lp.lower, lp.upper)]

        res = linprog(sigma * lp.objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=bounds, method="highs")
        if res.status == 2:
            return LpSolution(status=LpStatus.INFEASIBLE, backend=self.name,
                              residuals=verify(lp, LpSolution(status=LpStatus.INFEASIBLE)))
        if res.status == 3:
            return LpSolution(status=LpStatus.UNBOUNDED, backend=self.name,
                              residuals=verify(lp, LpSolution(status=LpStatus.UNBOUNDED)))
        if res.status != 0:
            raise SolverFailureError(f"HiGHS failed: {res.message}", {"status": int(res.status)})

        # HiGHS marginals are d(objective)/d(rhs) of the minimisation it solved
        y_min = np.zeros(lp.num_rows)
        if ineq.any():
            y_min[ineq] = res.ineqlin.marginals * flip[ineq]
        if eq.any():
            y_min[eq] = res.eqlin.marginals
        x = np.asarray(res.x, dtype=float)
        solution = LpSolution(status=LpStatus.OPTIMAL, x=x, duals=sigma * y_min,
                              objective=lp.value(x), iterations=int(getattr(res, "nit", 0)),
                              backend=self.name)
        return LpSolution(status=solution.status, x=x, duals=solution.duals,
                          objective=solution.objective, residuals=verify(lp, solution),
                          iterations=solution.iterations, backend=self.name)
