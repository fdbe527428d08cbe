import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from tqdm import tqdm

from src.config import config_value, settings

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def fan_out(func: Callable[[T], R], items: Sequence[T], desc: str = "cells",
            threads: Optional[int] = None) -> List[R]:
    """Map ``func`` over ``items`` on at most COT_LAB_THREADS workers, keeping input order."""
    items = list(items)
    workers = max(1, int(threads or settings.threads))
    warn_at = config_value("polar", "warn_cells", 10000)
    if len(items) > warn_at:
        logger.warning(f"Scanning {len(items)} {desc} with per-cell LPs; consider a cell filter")
    bar = dict(total=len(items), desc=desc, file=sys.stderr, leave=False,
               disable=None if settings.progress else True)
    if workers == 1:
        return [func(item) for item in tqdm(items, **bar)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(func, items), **bar))
