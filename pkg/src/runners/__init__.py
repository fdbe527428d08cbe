from typing import Optional

from src.errors import ShapeError
from src.runners.base import BaseRunner, RunOptions
from src.runners.envelope import EnvelopeRunner
from src.runners.gap import GapRunner
from src.runners.normalize import NormalizeRunner
from src.runners.order import OrderRunner
from src.runners.polar import PolarRunner
from src.runners.quotient import QuotientRunner
from src.runners.transport import TransportRunner

RUNNERS = {
    "ot": lambda options: TransportRunner("ot", options),
    "cot": lambda options: TransportRunner("cot", options),
    "mot": lambda options: TransportRunner("mot", options),
    "order": OrderRunner,
    "envelope": EnvelopeRunner,
    "polar": PolarRunner,
    "gap": GapRunner,
    "normalize": NormalizeRunner,
    "quotient": QuotientRunner,
}


def get_runner(mode: str, options: Optional[RunOptions] = None) -> BaseRunner:
    if mode not in RUNNERS:
        raise ShapeError(f"unknown problem mode '{mode}'", {"modes": sorted(RUNNERS)})
    return RUNNERS[mode](options)


__all__ = ["BaseRunner", "RunOptions", "RUNNERS", "get_runner"]
