"""Suite runner: builds the scenario, schedules certifiers and writes reports.

Scheduling order:
1. calculus_self_checks (a failure there skips every inequality certifier)
2. gradient_contraction (it produces c-hat for "estimated" curvature)
3. everything else, concurrently on a thread pool

Report files are sorted canonically and carry no timings, so they are
byte-identical for any job count.
"""
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from .certify import PREREQUISITES, CertReport, Verdict, dispatch, resolve_suite, sorted_reports
from .certify.base import error_report, relative_slack
from .certify.gradient import NAME as GRADIENT, estimate_c_hat
from .colors import error
from .errors import ConfigError, LabError
from .export import write_reports_csv, write_reports_json, write_table_csv
from .memory import get_diagnostics, reset_diagnostics, reset_result_store
from .scenarios.config import LabConfig
from .scenarios.factories import build_scenario
from .utils import debug_log, log, stable_json_dumps

ENV_OUT = "CARNOT_LAB_OUT"
ENV_JOBS = "CARNOT_LAB_JOBS"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2

SWEEP_ALIASES = {
    "shape": "chart.shape",
    "spacing": "chart.spacing",
    "times": "times.grid",
    "radius": "suite.params.convolution_radius",
    "eps": "times.eps",
}


@dataclass
class RunConfig:
    """One invocation: a validated config plus command-line overrides.

    None means "not given on the command line"; the environment and then
    the config file fill those in.
    """
    config: LabConfig
    suite: Tuple[str, ...] = ()
    out_dir: Optional[str] = None
    fmt: Optional[str] = None
    seed: Optional[int] = None
    jobs: Optional[int] = None

    def effective_config(self) -> LabConfig:
        if self.seed is None:
            return self.config
        suite = self.config.suite.model_copy(update={"seed": int(self.seed)})
        return self.config.model_copy(update={"suite": suite})

    def effective_out_dir(self) -> str:
        return self.out_dir or os.environ.get(ENV_OUT) or self.config.output.dir

    def effective_format(self) -> str:
        return self.fmt or self.config.output.format

    def effective_jobs(self) -> int:
        if self.jobs is not None:
            return max(1, int(self.jobs))
        env = os.environ.get(ENV_JOBS)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise ConfigError(f"{ENV_JOBS} must be an integer, got {env!r}") from None
        return self.config.suite.jobs or 1


@dataclass
class RunSummary:
    name: str
    fingerprint: str
    out_dir: str
    reports: List[CertReport]
    timings: Dict[str, float] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)
    c_hat: Dict[float, float] = field(default_factory=dict)
    diagnostics: Dict[str, int] = field(default_factory=dict)

    @property
    def counts(self) -> Dict[str, int]:
        out = {v.value: 0 for v in Verdict}
        for r in self.reports:
            out[r.verdict.value] += 1
        return out

    @property
    def failures(self) -> List[CertReport]:
        return [r for r in self.reports if r.verdict == Verdict.FAIL]

    @property
    def exit_code(self) -> int:
        return EXIT_FAIL if self.failures else EXIT_OK

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "fingerprint": self.fingerprint,
            "counts": self.counts,
            "exit_code": self.exit_code,
            "skipped": list(self.skipped),
            "timings": dict(sorted(self.timings.items())),
            "diagnostics": dict(self.diagnostics),
        }


def _timed(name: str, scenario) -> Tuple[str, List[CertReport], float]:
    """Run one certifier; a LabError becomes a single FAIL report and the run goes on."""
    start = time.perf_counter()
    try:
        reports = dispatch(name, scenario)
    except LabError as e:
        print(error(f"[!] {name}: {e}"))
        reports = [error_report(name, scenario.name, e)]
    elapsed = time.perf_counter() - start
    log(f"    {name}: {len(reports)} report(s) in {elapsed:.2f}s")
    return name, reports, elapsed


def write_outputs(summary: RunSummary, fmt: str) -> None:
    os.makedirs(summary.out_dir, exist_ok=True)
    rows = [r.to_row() for r in summary.reports]
    if fmt in ("json", "both"):
        write_reports_json(rows, os.path.join(summary.out_dir, "reports.json"))
    if fmt in ("csv", "both"):
        write_reports_csv(rows, os.path.join(summary.out_dir, "reports.csv"))
    if summary.c_hat:
        write_table_csv(("t", "c_hat"), sorted(summary.c_hat.items()),
                        os.path.join(summary.out_dir, "chat_table.csv"))
    with open(os.path.join(summary.out_dir, "summary.json"), "w") as fh:
        fh.write(stable_json_dumps(summary.to_dict()))
        fh.write("\n")


def run(run_config: RunConfig, write: bool = True) -> RunSummary:
    """Run the requested certifiers on one scenario."""
    config = run_config.effective_config()
    names = resolve_suite(run_config.suite or tuple(config.suite.certifiers))
    reset_result_store()
    reset_diagnostics()
    scenario = build_scenario(config)
    jobs = run_config.effective_jobs()
    debug_log(f"run {scenario.name}: {names} with {jobs} job(s)")

    reports: List[CertReport] = []
    timings: Dict[str, float] = {}
    skipped: List[str] = []

    def collect(result: Tuple[str, List[CertReport], float]) -> None:
        name, found, elapsed = result
        reports.extend(found)
        timings[name] = elapsed

    pending = list(names)
    for name in [n for n in PREREQUISITES if n in pending]:
        pending.remove(name)
        collect(_timed(name, scenario))
    if any(r.verdict == Verdict.FAIL for r in reports):
        skipped, pending = pending, []
    if GRADIENT in pending:
        pending.remove(GRADIENT)
        collect(_timed(GRADIENT, scenario))
    if jobs > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for result in pool.map(lambda n: _timed(n, scenario), pending):
                collect(result)
    else:
        for name in pending:
            collect(_timed(name, scenario))

    c_hat = {}
    if scenario.estimated and not skipped:
        try:
            c_hat = estimate_c_hat(scenario)
        except LabError as e:
            debug_log(f"no c-hat table: {e}")
    summary = RunSummary(scenario.name, scenario.fingerprint, run_config.effective_out_dir(),
                         sorted_reports(reports), timings, skipped, c_hat,
                         get_diagnostics().snapshot())
    if write:
        write_outputs(summary, run_config.effective_format())
    return summary


# --- sweeps ------------------------------------------------------------------

def _set_path(raw: Dict[str, Any], path: str, value: Any) -> None:
    keys = path.split(".")
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def sweep_value(config: LabConfig, param: str, value: str) -> Any:
    """Coerce a command-line sweep value for the given parameter."""
    path = SWEEP_ALIASES.get(param, param)
    try:
        if path == "chart.shape":
            dim = 3 if config.model.family == "heisenberg1" else config.model.dimension
            return [int(value)] * dim
        if path in ("times.grid", "times.eps", "times.h", "times.s"):
            return [float(value)]
        return float(value)
    except ValueError:
        raise ConfigError(f"sweep value {value!r} is not a number for {param}") from None


def sweep_config(config: LabConfig, param: str, value: str) -> LabConfig:
    raw = config.model_dump(mode="json")
    _set_path(raw, SWEEP_ALIASES.get(param, param), sweep_value(config, param, value))
    try:
        return LabConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"sweep {param}={value}: {where}: {first['msg']}") from None


def convergence_rows(param: str, value: str, summary: RunSummary) -> List[List[Any]]:
    """Per certifier name: case count, failures and the worst relative slack."""
    by_name: Dict[str, List[CertReport]] = {}
    for r in summary.reports:
        by_name.setdefault(r.name, []).append(r)
    rows = []
    for name in sorted(by_name):
        group = by_name[name]
        worst = min(relative_slack(r) for r in group)
        fails = sum(r.verdict == Verdict.FAIL for r in group)
        rows.append([param, value, name, len(group), fails, worst])
    return rows


def sweep(run_config: RunConfig, param: str, values: Sequence[str]) -> List[RunSummary]:
    """Re-run the suite once per value and tabulate slack trends in convergence.csv."""
    base_out = run_config.effective_out_dir()
    summaries, rows = [], []
    for value in values:
        cfg = sweep_config(run_config.config, param, value)
        sub = RunConfig(cfg, run_config.suite, os.path.join(base_out, f"{param}={value}"),
                        run_config.fmt, run_config.seed, run_config.jobs)
        log(f"[*] sweep {param}={value}")
        summary = run(sub)
        summaries.append(summary)
        rows.extend(convergence_rows(param, value, summary))
    os.makedirs(base_out, exist_ok=True)
    write_table_csv(("param", "value", "name", "cases", "fails", "worst_relative_slack"), rows,
                    os.path.join(base_out, "convergence.csv"))
    return summaries


def exit_code_for(summaries: Sequence[RunSummary]) -> int:
    return EXIT_FAIL if any(s.exit_code == EXIT_FAIL for s in summaries) else EXIT_OK
