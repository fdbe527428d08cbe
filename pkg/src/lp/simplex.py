"""Two-phase dense tableau simplex with certificates.

Pricing is Dantzig's most negative reduced cost, switching to Bland's
smallest-index rule after a run of degenerate pivots. Ratio-test ties go to the
row whose basic variable has the smallest index, so a given program always
follows the same pivot path.
"""

from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional

import numpy as np
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from src.config import config_value
from src.errors import SolverFailureError
from src.lp.base_solver import LpSolver
from src.lp.program import LinearProgram, LpSolution, LpStatus, Relation
from src.lp.verify import verify


class _Breakdown(Exception):
    """Numerical trouble inside one simplex attempt."""


@dataclass
class _StandardForm:
    A: np.ndarray
    b: np.ndarray
    cost: np.ndarray
    basis: np.ndarray
    artificial: np.ndarray
    struct_cols: np.ndarray
    struct_var: np.ndarray
    struct_sign: np.ndarray
    shift: np.ndarray
    flip: np.ndarray
    kept_rows: np.ndarray


def _given(value, key: str, default):
    return config_value("solver", key, default) if value is None else value


class SimplexSolver(LpSolver):
    """Certified tableau simplex for desk-scale programs."""

    name = "simplex"

    def __init__(self, feasibility_tol: Optional[float] = None, optimality_tol: Optional[float] = None,
                 pivot_tol: Optional[float] = None, degenerate_switch: Optional[int] = None,
                 max_iterations: Optional[int] = None):
        super().__init__()
        self.feasibility_tol = _given(feasibility_tol, "feasibility_tol", 1e-9)
        self.optimality_tol = _given(optimality_tol, "optimality_tol", 1e-9)
        self.pivot_tol = _given(pivot_tol, "pivot_tol", 1e-11)
        self.degenerate_switch = _given(degenerate_switch, "degenerate_switch", 50)
        self.max_iterations = _given(max_iterations, "max_iterations", 200000)
        self.trace: Deque[Dict] = deque(maxlen=config_value("solver", "trace_length", 200))
        self.iterations = 0

    def solve(self, lp: LinearProgram) -> LpSolution:
        try:
            for attempt in Retrying(stop=stop_after_attempt(2),
                                    retry=retry_if_exception_type(_Breakdown),
                                    reraise=True):
                with attempt:
                    rule = "dantzig" if attempt.retry_state.attempt_number == 1 else "bland"
                    if rule == "bland":
                        self.logger.warning("Simplex breakdown, retrying with Bland's rule")
                    solution = self._run(lp, rule)
        except _Breakdown as e:
            raise SolverFailureError(
                f"simplex failed after anti-cycling fallback: {e}",
                {"trace": list(self.trace), "iterations": self.iterations},
            ) from e
        residuals = verify(lp, solution)
        return LpSolution(
            status=solution.status,
            x=solution.x,
            duals=solution.duals,
            objective=solution.objective,
            residuals=residuals,
            certificate=solution.certificate,
            iterations=solution.iterations,
            backend=self.name,
        )

    # -- standard form -----------------------------------------------------

    def _standardize(self, lp: LinearProgram) -> "_StandardForm | LpSolution":
        A0 = lp.matrix.toarray()
        m, n = A0.shape
        sigma = lp.sense.sign
        c = sigma * lp.objective
        lo, hi = lp.lower, lp.upper

        # presolve: drop empty rows, or report infeasibility straight away
        nonempty = np.abs(A0).sum(axis=1) > 0
        for i in np.flatnonzero(~nonempty):
            rel, rhs = lp.relations[i], lp.rhs[i]
            bad = ((rel is Relation.LE and rhs < -self.feasibility_tol)
                   or (rel is Relation.GE and rhs > self.feasibility_tol)
                   or (rel is Relation.EQ and abs(rhs) > self.feasibility_tol))
            if bad:
                y = np.zeros(m)
                y[i] = np.sign(rhs)
                return LpSolution(status=LpStatus.INFEASIBLE, certificate=y)
        kept = np.flatnonzero(nonempty)

        shift = np.zeros(n)
        struct_var: List[int] = []
        struct_sign: List[float] = []
        boxes: List[tuple] = []
        for j in range(n):
            l, u = lo[j], hi[j]
            if np.isfinite(l) and np.isfinite(u) and u - l <= 0.0:
                shift[j] = l
            elif np.isfinite(l):
                shift[j] = l
                if np.isfinite(u):
                    boxes.append((len(struct_var), u - l))
                struct_var.append(j)
                struct_sign.append(1.0)
            elif np.isfinite(u):
                shift[j] = u
                struct_var.append(j)
                struct_sign.append(-1.0)
            else:
                struct_var.extend([j, j])
                struct_sign.extend([1.0, -1.0])
        struct_var_a = np.asarray(struct_var, dtype=int)
        struct_sign_a = np.asarray(struct_sign, dtype=float)
        ns = struct_var_a.size

        rows = kept.size
        M = rows + len(boxes)
        S = np.zeros((M, ns))
        S[:rows] = A0[kept][:, struct_var_a] * struct_sign_a
        b = np.concatenate([lp.rhs[kept] - A0[kept] @ shift, np.array([w for _, w in boxes])])
        for t, (col, _) in enumerate(boxes):
            S[rows + t, col] = 1.0

        slack_cols = []
        for r, i in enumerate(kept):
            rel = lp.relations[i]
            if rel is Relation.LE:
                slack_cols.append((r, 1.0))
            elif rel is Relation.GE:
                slack_cols.append((r, -1.0))
        for t in range(len(boxes)):
            slack_cols.append((rows + t, 1.0))
        L = np.zeros((M, len(slack_cols)))
        for k, (r, s) in enumerate(slack_cols):
            L[r, k] = s

        flip = np.where(b < 0, -1.0, 1.0)
        S *= flip[:, None]
        L *= flip[:, None]
        b = b * flip

        basis = np.full(M, -1, dtype=int)
        for k, (r, _) in enumerate(slack_cols):
            if L[r, k] > 0 and basis[r] < 0:
                basis[r] = ns + k
        need = np.flatnonzero(basis < 0)
        R = np.zeros((M, need.size))
        for k, r in enumerate(need):
            R[r, k] = 1.0
            basis[r] = ns + L.shape[1] + k

        A = np.hstack([S, L, R])
        N = A.shape[1]
        cost = np.zeros(N)
        cost[:ns] = c[struct_var_a] * struct_sign_a
        artificial = np.zeros(N, dtype=bool)
        artificial[ns + L.shape[1]:] = True
        return _StandardForm(A=A, b=b, cost=cost, basis=basis, artificial=artificial,
                             struct_cols=np.arange(ns), struct_var=struct_var_a,
                             struct_sign=struct_sign_a, shift=shift, flip=flip, kept_rows=kept)

    # -- tableau mechanics -------------------------------------------------

    @staticmethod
    def _set_objective(T: np.ndarray, basis: np.ndarray, cost: np.ndarray) -> None:
        M = basis.size
        T[M, :-1] = cost
        T[M, -1] = 0.0
        if M:
            T[M] -= cost[basis] @ T[:M]

    def _pivot(self, T: np.ndarray, r: int, q: int) -> None:
        T[r] /= T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        M = T.shape[0] - 1
        rhs = T[:M, -1]
        tiny = (rhs < 0.0) & (rhs > -self.feasibility_tol * 1e3)
        rhs[tiny] = 0.0
        if not np.all(np.isfinite(T[r])) or np.any(rhs < 0.0):
            raise _Breakdown(f"lost feasibility after pivot on row {r}, column {q}")

    def _iterate(self, T: np.ndarray, basis: np.ndarray, allowed: np.ndarray, rule: str,
                 phase: int) -> Optional[int]:
        """Pivot to optimality; returns the entering column of an unbounded ray, else None."""
        M = basis.size
        streak = 0
        while True:
            reduced = T[M, :-1]
            candidates = np.flatnonzero((reduced < -self.optimality_tol) & allowed)
            if candidates.size == 0:
                return None
            self.iterations += 1
            if self.iterations > self.max_iterations:
                raise _Breakdown("iteration limit reached")
            if rule == "bland" or streak >= self.degenerate_switch:
                q = int(candidates[0])
            else:
                q = int(candidates[np.argmin(reduced[candidates])])
            column = T[:M, q]
            rows = np.flatnonzero(column > self.pivot_tol)
            if rows.size == 0:
                return q
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + self.feasibility_tol]
            r = int(ties[np.argmin(basis[ties])])
            streak = streak + 1 if best <= self.feasibility_tol else 0
            leaving = int(basis[r])
            self._pivot(T, r, q)
            basis[r] = q
            self.trace.append({"phase": phase, "iteration": self.iterations, "entering": q,
                               "leaving": leaving, "objective": float(-T[M, -1]),
                               "rule": "bland" if rule == "bland" or streak >= self.degenerate_switch
                               else "dantzig"})

    @staticmethod
    def _basis_solve(A: np.ndarray, basis: np.ndarray, rhs: np.ndarray, transpose: bool):
        B = A[:, basis]
        try:
            return np.linalg.solve(B.T if transpose else B, rhs)
        except np.linalg.LinAlgError:
            return None

    def _row_duals(self, sf: _StandardForm, T: np.ndarray, basis: np.ndarray,
                   cost: np.ndarray) -> np.ndarray:
        M = basis.size
        if M == 0:
            return np.zeros(0)
        y = self._basis_solve(sf.A, basis, cost[basis], transpose=True)
        if y is None:
            y = np.linalg.lstsq(sf.A[:, basis].T, cost[basis], rcond=None)[0]
        return y

    def _to_original_rows(self, lp: LinearProgram, sf: _StandardForm, y_std: np.ndarray) -> np.ndarray:
        y = np.zeros(lp.num_rows)
        rows = sf.kept_rows.size
        y[sf.kept_rows] = sf.flip[:rows] * y_std[:rows]
        return y

    def _to_original_vars(self, sf: _StandardForm, x_std: np.ndarray, with_shift: bool) -> np.ndarray:
        x = sf.shift.copy() if with_shift else np.zeros_like(sf.shift)
        np.add.at(x, sf.struct_var, sf.struct_sign * x_std[sf.struct_cols])
        return x

    # -- driver ------------------------------------------------------------

    def _run(self, lp: LinearProgram, rule: str) -> LpSolution:
        self.trace.clear()
        self.iterations = 0
        sf = self._standardize(lp)
        if isinstance(sf, LpSolution):
            return sf
        A, b = sf.A, sf.b
        M, N = A.shape
        basis = sf.basis.copy()
        T = np.zeros((M + 1, N + 1))
        T[:M, :N] = A
        T[:M, N] = b
        allowed = ~sf.artificial

        # phase I
        phase_one = sf.artificial.astype(float)
        self._set_objective(T, basis, phase_one)
        self._iterate(T, basis, allowed, rule, phase=1)
        infeasibility = -T[M, N]
        if infeasibility > self.feasibility_tol * max(1.0, float(np.abs(b).max(initial=0.0))):
            y_std = self._row_duals(sf, T, basis, phase_one)
            farkas = self._to_original_rows(lp, sf, y_std)
            self.logger.debug(f"Phase I ended with infeasibility {infeasibility:.3e}")
            return LpSolution(status=LpStatus.INFEASIBLE, certificate=farkas,
                              iterations=self.iterations)

        # drive zero-level artificials out of the basis; rows that cannot pivot are redundant
        for r in range(M):
            if sf.artificial[basis[r]]:
                entries = np.flatnonzero((np.abs(T[r, :N]) > self.pivot_tol) & allowed)
                if entries.size:
                    q = int(entries[np.argmax(np.abs(T[r, entries]))])
                    T[r, N] = 0.0
                    self._pivot(T, r, q)
                    basis[r] = q

        # phase II
        self._set_objective(T, basis, sf.cost)
        entering = self._iterate(T, basis, allowed, rule, phase=2)
        if entering is not None:
            direction = np.zeros(N)
            direction[entering] = 1.0
            direction[basis] = -T[:M, entering]
            ray = self._to_original_vars(sf, direction, with_shift=False)
            scale = np.abs(ray).max(initial=0.0)
            if scale > 0:
                ray = ray / scale
            return LpSolution(status=LpStatus.UNBOUNDED, certificate=ray, iterations=self.iterations)

        x_std = np.zeros(N)
        x_std[basis] = T[:M, N]
        if M:
            polished = self._basis_solve(A, basis, b, transpose=False)
            if polished is not None and np.all(np.isfinite(polished)):
                x_std[basis] = polished
        x_std = np.maximum(x_std, 0.0)
        x = self._to_original_vars(sf, x_std, with_shift=True)
        x = np.clip(x, lp.lower, lp.upper)
        y_std = self._row_duals(sf, T, basis, sf.cost)
        duals = lp.sense.sign * self._to_original_rows(lp, sf, y_std)
        return LpSolution(status=LpStatus.OPTIMAL, x=x, duals=duals, objective=lp.value(x),
                          iterations=self.iterations)
