from src.duality.common import DualityReport, Hedge, PayoffTable, PolarCertificate, Residuals
from src.duality.constrained import (
    MomentConstraintSet,
    check_structure,
    multiplier_bound_check,
    solve_cot,
)
from src.duality.envelope import (
    GridFunction,
    convex_envelope,
    envelope_as_supremum_check,
    envelope_values,
    is_convex_bidual,
    lower_hull_values,
)
from src.duality.martingale import (
    TradingStrategy,
    apply_T,
    bound_guaranteed,
    is_martingale,
    martingale_defect,
    recover_gamma,
    reflection_closed,
    superhedge_martingale,
    supermartingale_decompose,
)
from src.duality.mot import (
    anchor_grid,
    gap_sequence,
    normalization_constant,
    normalize_mot_decomposition,
    polar_scan_mot,
    solve_mot,
    touching_points,
    witness_table,
)
from src.duality.transport import (
    bb_superhedge,
    normalize_ot_decomposition,
    polar_scan_ot,
    quotient_distance,
    solve_ot,
)

__all__ = [
    "DualityReport", "Hedge", "PayoffTable", "PolarCertificate", "Residuals",
    "MomentConstraintSet", "check_structure", "multiplier_bound_check", "solve_cot",
    "GridFunction", "convex_envelope", "envelope_as_supremum_check", "envelope_values",
    "is_convex_bidual", "lower_hull_values",
    "TradingStrategy", "apply_T", "is_martingale", "martingale_defect", "recover_gamma",
    "bound_guaranteed", "reflection_closed",
    "superhedge_martingale", "supermartingale_decompose",
    "anchor_grid", "gap_sequence", "normalization_constant", "normalize_mot_decomposition",
    "polar_scan_mot", "solve_mot",
    "touching_points",
    "witness_table",
    "bb_superhedge", "normalize_ot_decomposition", "polar_scan_ot", "quotient_distance", "solve_ot",
]
