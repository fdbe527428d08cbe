"""Reading problem and report files, writing reports and CSV tables atomically."""

import json
import logging
import math
import os
import tempfile
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.config import config_value
from src.errors import ShapeError
from src.models import ProblemFile, ReportFile

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _read_json(path: PathLike, what: str) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ShapeError(f"cannot read {what} file", {"path": str(path), "reason": str(e)})
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ShapeError(f"{what} file is not valid JSON",
                         {"path": str(path), "line": e.lineno, "column": e.colno, "reason": e.msg})


def _validation_details(e: ValidationError) -> Dict[str, Any]:
    return {"errors": [{"loc": [str(p) for p in err["loc"]], "msg": err["msg"]} for err in e.errors()]}


def parse_problem(data: Any) -> ProblemFile:
    try:
        return ProblemFile.model_validate(data)
    except ValidationError as e:
        raise ShapeError("problem file does not match the schema", _validation_details(e))


def load_problem(path: PathLike) -> ProblemFile:
    problem = parse_problem(_read_json(path, "problem"))
    logger.info(f"Loaded {problem.mode} problem from {path}")
    return problem


def parse_report(data: Any) -> ReportFile:
    try:
        return ReportFile.model_validate(data)
    except ValidationError as e:
        raise ShapeError("report file does not match the schema", _validation_details(e))


def load_report(path: PathLike) -> ReportFile:
    return parse_report(_read_json(path, "report"))


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; numpy values unwrapped, non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def dumps_report(report: Dict[str, Any]) -> str:
    indent = config_value("report", "indent", 2)
    return json.dumps(to_jsonable(report), indent=indent, allow_nan=False) + "\n"


def _atomic_write(path: PathLike, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: Dict[str, Any], path: Optional[PathLike]) -> str:
    text = dumps_report(report)
    if path is not None:
        _atomic_write(path, text)
        logger.info(f"Report written to {path}")
    return text


def write_csv(frame: pd.DataFrame, path: PathLike) -> None:
    _atomic_write(path, frame.to_csv(index=False, lineterminator="\n"))
    logger.info(f"{len(frame)} CSV rows written to {path}")
