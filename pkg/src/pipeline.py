from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import logging

from src.config import config_value
from src.errors import LabError, ShapeError, SolverFailureError, VerificationError
from src.models import ProblemFile
from src.runners import BaseRunner, RunOptions, get_runner
from src.runners.order import OrderRunner
from src.utils.io import load_problem, load_report, write_csv, write_report

COMMAND_MODES = {
    "solve": None,
    "check-order": "order",
    "envelope": "envelope",
    "polar-scan": "polar",
    "gap-demo": "gap",
    "normalize-dual": "normalize",
    "quotient-dist": "quotient",
}

# problem modes that carry a grid with both marginals
MARGINAL_MODES = {"ot", "cot", "mot", "order", "polar", "quotient"}


def retarget(problem: ProblemFile, mode: str) -> ProblemFile:
    """Run a marginal problem under another marginal mode (e.g. polar scan of an MOT file)."""
    if problem.mode == mode:
        return problem
    if mode in MARGINAL_MODES and problem.mode in MARGINAL_MODES:
        params = dict(problem.parameters)
        if mode == "polar":
            params.setdefault("kind", "mot" if problem.mode == "mot" else "ot")
        return problem.model_copy(update={"mode": mode, "parameters": params})
    raise ShapeError(f"a '{problem.mode}' problem cannot be run as '{mode}'",
                     {"problem_mode": problem.mode, "requested_mode": mode})


@dataclass
class RunResult:
    report: Dict[str, Any]
    exit_code: int
    problem: Optional[ProblemFile] = None
    runner: Optional[BaseRunner] = None


class LabPipeline:
    """Parse, dispatch to a runner, assemble the report, map failures to exit codes."""

    def __init__(self, options: Optional[RunOptions] = None):
        self.options = options or RunOptions()
        self.logger = logging.getLogger(self.__class__.__name__)

    def _skeleton(self, command: str, mode: str) -> Dict[str, Any]:
        return {
            "schema": config_value("report", "schema", 1),
            "mode": mode,
            "command": command,
            "status": "ok",
            "values": {},
            "witnesses": {},
            "diagnostics": {},
            "error": None,
        }

    def _fail(self, results: Dict[str, Any], error: LabError) -> int:
        results["status"] = "error"
        results["error"] = error.to_dict()
        self.logger.error(f"{error.kind}: {error.message}")
        return error.exit_code

    async def run(self, command: str, input_path: Union[str, Path, None] = None,
                  problem: Optional[ProblemFile] = None,
                  overrides: Optional[Dict[str, Any]] = None) -> RunResult:
        """Run one command; a failed run still yields a report with an ``error`` object."""
        results = self._skeleton(command, COMMAND_MODES.get(command) or "unknown")
        runner = None
        try:
            if command not in COMMAND_MODES:
                raise ShapeError(f"unknown command '{command}'", {"commands": sorted(COMMAND_MODES)})
            if problem is None:
                if input_path is None:
                    raise ShapeError(f"'{command}' needs an input problem file")
                problem = load_problem(input_path)
            if overrides:
                problem = problem.model_copy(update={"parameters": {**problem.parameters, **overrides}})
            target = COMMAND_MODES[command]
            if target is not None:
                problem = retarget(problem, target)
            results["mode"] = problem.mode
            runner = get_runner(problem.mode, self.options)
            self.logger.info(f"Running {command} on a {problem.mode} problem")
            results.update(await runner.process(problem))
            return RunResult(results, 0, problem, runner)
        except LabError as e:
            return RunResult(results, self._fail(results, e), problem, runner)
        except Exception as e:
            self.logger.exception("Unexpected failure")
            code = self._fail(results, SolverFailureError(f"unexpected failure: {e}",
                                                          {"type": type(e).__name__}))
            return RunResult(results, code, problem, runner)

    async def random_order_suite(self, count: int) -> RunResult:
        results = self._skeleton("check-order", "order")
        runner = OrderRunner(self.options)
        try:
            results.update(await runner.random_suite(count))
        except LabError as e:
            return RunResult(results, self._fail(results, e), None, runner)
        if results["values"]["disagreements"]:
            err = VerificationError("potential and LP order checks disagree",
                                    {"disagreements": results["values"]["disagreements"]})
            return RunResult(results, self._fail(results, err), None, runner)
        return RunResult(results, 0, None, runner)

    def verify(self, report_path: Union[str, Path], input_path: Union[str, Path]) -> RunResult:
        """Re-check a stored report against its problem without solving anything."""
        results = self._skeleton("verify", "unknown")
        try:
            report = load_report(report_path)
            problem = retarget(load_problem(input_path), report.mode)
            results["mode"] = report.mode
            runner = get_runner(report.mode, self.options)
            try:
                if report.status == "ok":
                    failures: List[str] = runner.verify(problem, report)
                else:
                    failures = runner.verify_error(problem, report)
            except LabError:
                raise
            except Exception as e:
                raise ShapeError("report does not fit the problem", {"reason": str(e), "type": type(e).__name__})
        except LabError as e:
            return RunResult(results, self._fail(results, e))

        results["values"] = {"checks_failed": len(failures), "report_status": report.status}
        results["witnesses"] = {"failures": failures}
        if failures:
            code = self._fail(results, VerificationError("report failed verification", {"failures": failures}))
            results["status"] = "failed"
            return RunResult(results, code, problem, runner)
        self.logger.info("Report verified")
        return RunResult(results, 0, problem, runner)

    def emit(self, result: RunResult, output: Union[str, Path, None] = None,
             csv_path: Union[str, Path, None] = None) -> str:
        """Write the report (atomically when ``output`` is given) and the optional CSV rows."""
        text = write_report(result.report, output)
        if csv_path is not None:
            if result.exit_code != 0 or result.runner is None or result.problem is None:
                self.logger.warning("No CSV rows for a failed run")
            else:
                frame = result.runner.csv_frame(result.problem, result.report)
                if frame is None:
                    self.logger.warning(f"Mode '{result.report['mode']}' has no CSV rows for this problem")
                else:
                    write_csv(frame, csv_path)
        return text
