"""Convexity against martingale spreads and the convex envelope of a grid function."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

import numpy as np

from src.duality.common import require_optimal
from src.duality.programs import CouplingProgram
from src.errors import InfeasibleError, ShapeError, UnsupportedDimensionError
from src.lp import LpStatus, Sense, solve
from src.measures import Axis, DiscreteMeasure, SupportGrid, as_points, ell
from src.utils.parallel import fan_out

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridFunction:
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.shape[0] != pts.shape[0]:
            raise ShapeError("function values do not match its points",
                             {"points": pts.shape[0], "values": vals.shape[0]})
        if not np.all(np.isfinite(vals)):
            raise ShapeError("function values must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def norm(self) -> float:
        return float((np.abs(self.values) / ell(self.points)).max())


def _spread_program(phi: GridFunction, x: np.ndarray) -> CouplingProgram:
    grid = SupportGrid(x[None, :], phi.points)
    program = CouplingProgram(grid, Sense.MIN).objective(phi.values[None, :])
    return program.x_marginal(np.ones(1)).martingale()


@dataclass
class ConvexityResult:
    convex: bool
    spreads: List[Dict[str, Any]] = field(default_factory=list)
    skipped: List[int] = field(default_factory=list)
    worst: float = 0.0

    def __bool__(self) -> bool:
        return self.convex

    @property
    def violating_spread(self) -> Optional[Dict[str, Any]]:
        return self.spreads[0] if self.spreads else None

    def to_dict(self) -> Dict[str, Any]:
        return {"convex": self.convex, "worst_violation": self.worst,
                "violating_spreads": self.spreads, "skipped": self.skipped}


def is_convex_bidual(phi: GridFunction, tol: float = 1e-9, solver=None) -> ConvexityResult:
    """``phi(x) <= sum_j p_j phi(y_j)`` for every spread ``p`` with mean ``x``.

    One LP per grid point finds the cheapest spread; points with no spread are
    skipped.
    """
    scale = max(1.0, float(np.abs(phi.values).max()))

    def cheapest(i: int):
        program = _spread_program(phi, phi.points[i])
        sol = solve(program.build(), solver)
        if sol.status is LpStatus.INFEASIBLE:
            return None
        sol = require_optimal(sol, "spread LP")
        return float(sol.objective), sol.x[program.eta]

    result = ConvexityResult(convex=True)
    for i, found in enumerate(fan_out(cheapest, range(phi.size), desc="spread LPs")):
        if found is None:
            result.skipped.append(i)
            continue
        value, p = found
        gap = phi.values[i] - value
        if gap > tol * scale:
            result.convex = False
            support = np.flatnonzero(p > 1e-12)
            result.spreads.append({
                "index": i,
                "x": phi.points[i].tolist() if phi.dim > 1 else float(phi.points[i, 0]),
                "weights": [[int(j), float(p[j])] for j in support],
                "violation": float(gap),
            })
            result.worst = max(result.worst, float(gap))
    result.spreads.sort(key=lambda s: -s["violation"])
    return result


def _envelope_part(phi: GridFunction, alpha: DiscreteMeasure, solver=None) -> float:
    keep = alpha.support
    if keep.size == 0:
        return 0.0
    grid = SupportGrid(alpha.points[keep], phi.points)
    program = CouplingProgram(grid, Sense.MIN)
    program.objective(np.tile(phi.values, (keep.size, 1)))
    program.x_marginal(alpha.weights[keep]).martingale()
    sol = solve(program.build(), solver)
    if sol.status is LpStatus.INFEASIBLE:
        raise InfeasibleError("measure charges points outside the hull of the function's grid",
                              {"certificate": None if sol.certificate is None else sol.certificate.tolist()})
    return float(require_optimal(sol, "envelope LP").objective)


def convex_envelope(phi: GridFunction, alpha: DiscreteMeasure, solver=None) -> float:
    """``inf phi(eta_y)`` over martingale ``eta >= 0`` with ``eta_x = alpha``; signed alpha splits."""
    if alpha.dim != phi.dim:
        raise ShapeError("measure and function live in different dimensions",
                         {"measure": alpha.dim, "function": phi.dim})
    if np.any(alpha.weights < 0):
        return (_envelope_part(phi, alpha.positive_part, solver)
                - _envelope_part(phi, alpha.negative_part, solver))
    return _envelope_part(phi, alpha, solver)


def envelope_values(phi: GridFunction, at: Optional[np.ndarray] = None, solver=None) -> np.ndarray:
    """``b^c(delta_x)`` at each point of ``at`` (default the function's own grid)."""
    pts = phi.points if at is None else as_points(at, phi.dim)

    def at_point(i: int) -> float:
        return convex_envelope(phi, DiscreteMeasure(pts[i:i + 1], np.ones(1), Axis.X), solver)

    return np.asarray(fan_out(at_point, range(pts.shape[0]), desc="envelope LPs"), dtype=float)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def lower_hull_values(points, values, at=None) -> np.ndarray:
    """Lower convex hull of the graph ``{(t_j, v_j)}`` evaluated at ``at``; NaN outside the hull."""
    t = np.asarray(points, dtype=float).reshape(-1)
    v = np.asarray(values, dtype=float).reshape(-1)
    order = np.lexsort((v, t))
    hull: List[tuple] = []
    for k in order:
        p = (t[k], v[k])
        if hull and hull[-1][0] == p[0]:
            continue
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    hx = np.array([p[0] for p in hull])
    hy = np.array([p[1] for p in hull])
    query = t if at is None else np.asarray(at, dtype=float).reshape(-1)
    out = np.interp(query, hx, hy)
    out[(query < hx[0]) | (query > hx[-1])] = np.nan
    return out


@dataclass
class EnvelopeCheck:
    envelope: np.ndarray
    hull: np.ndarray
    convex: bool
    dominance: float
    oracle_error: float
    idempotence_error: float
    envelope_norm: float
    function_norm: float
    tolerance: float = 1e-9

    @property
    def dominated(self) -> bool:
        return self.dominance <= 1e-12 * max(1.0, self.function_norm)

    @property
    def matches_oracle(self) -> bool:
        return self.oracle_error <= self.tolerance

    @property
    def idempotent(self) -> bool:
        return self.idempotence_error <= self.tolerance

    def __bool__(self) -> bool:
        return self.convex and self.dominated and self.matches_oracle and self.idempotent

    def to_dict(self) -> Dict[str, Any]:
        return {
            "envelope": self.envelope.tolist(),
            "hull": self.hull.tolist(),
            "convex": self.convex,
            "dominance": self.dominance,
            "oracle_error": self.oracle_error,
            "idempotence_error": self.idempotence_error,
            # exploratory: compared, not asserted
            "envelope_norm": self.envelope_norm,
            "function_norm": self.function_norm,
            "passed": bool(self),
        }


def envelope_as_supremum_check(phi: GridFunction, tol: float = 1e-9, solver=None) -> EnvelopeCheck:
    """The envelope is convex, lies below ``phi`` and is the largest such function."""
    if phi.dim != 1:
        raise UnsupportedDimensionError("envelope check needs a 1D function", {"dim": phi.dim})
    env = envelope_values(phi, solver=solver)
    hull = lower_hull_values(phi.points[:, 0], phi.values)
    env_fn = GridFunction(phi.points, env)
    again = envelope_values(env_fn, solver=solver)
    scale = max(1.0, float(np.abs(phi.values).max()))
    check = EnvelopeCheck(
        envelope=env,
        hull=hull,
        convex=is_convex_bidual(env_fn, tol, solver).convex,
        dominance=float(max((env - phi.values).max(), 0.0)),
        oracle_error=float(np.abs(env - hull).max()) / scale,
        idempotence_error=float(np.abs(again - env).max()) / scale,
        envelope_norm=env_fn.norm,
        function_norm=phi.norm,
        tolerance=tol,
    )
    if not check:
        logger.warning(f"Envelope check failed: {check.to_dict()}")
    return check
