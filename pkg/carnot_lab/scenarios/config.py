"""Scenario configuration: TOML files validated with pydantic.

A scenario file has the tables [model], [chart], [curvature], [tolerances],
[times], [functions], [measures.<name>], [suite] and [output]; every key is
optional and falls back to LabDefaults.
"""
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..errors import ConfigError
from ..utils import fingerprint


class LabDefaults:
    """Default values for scenario files.

    Users can override any of these in the matching config table.
    """
    # [model]
    family: str = "abelian_box"
    dimension: int = 2

    # [chart] for abelian boxes
    box_lo: float = -4.0
    box_hi: float = 4.0
    shape: int = 64

    # [chart] for H^1 lattice charts (hz = h^2 / 2)
    spacing: float = 0.25
    half_nodes_xy: int = 12
    half_nodes_z: int = 48

    # Interior window used by pointwise checks
    window: float = 0.2

    # [times]
    time_grid: Tuple[float, ...] = (0.05, 0.1, 0.2)
    s_grid: Tuple[float, ...] = (0.25, 0.5, 0.75)
    h_grid: Tuple[float, ...] = (0.05, 0.1)
    eps_list: Tuple[float, ...] = (1.0, 0.1)

    # [measures]
    measure_width: float = 0.5
    measure_offset: float = 0.5

    # [suite] / [output]
    seed: int = 0
    out_dir: str = "out"
    output_format: str = "both"


defaults = LabDefaults()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    family: Literal["abelian_box", "abelian_torus", "heisenberg1"] = defaults.family
    dimension: int = Field(defaults.dimension, ge=1, le=3)
    periods: Optional[List[float]] = None

    @field_validator("periods")
    @classmethod
    def _positive_periods(cls, v):
        if v is not None and (not v or min(v) <= 0):
            raise ValueError("periods must be positive")
        return v


class ChartSection(_Section):
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None
    shape: Optional[List[int]] = None
    spacing: float = Field(defaults.spacing, gt=0)
    half_nodes_xy: int = Field(defaults.half_nodes_xy, ge=1)
    half_nodes_z: int = Field(defaults.half_nodes_z, ge=1)
    window: float = Field(defaults.window, ge=0, lt=0.5)

    @field_validator("shape")
    @classmethod
    def _positive_shape(cls, v):
        if v is not None and min(v) < 2:
            raise ValueError("every axis needs at least 2 nodes")
        return v


class CurvatureSection(_Section):
    kind: Literal["constant", "exponential", "tabulated", "su2", "estimated"] = "constant"
    C: Optional[float] = Field(None, gt=0)
    K: float = 0.0
    knots: List[float] = []
    values: List[float] = []


class ToleranceSection(_Section):
    pointwise_rel: float = Field(5e-2, gt=0, le=0.2)
    integral_rel: float = Field(1e-2, gt=0, le=0.2)
    ot_rel: float = Field(2e-2, gt=0, le=0.2)
    submult_rel: float = Field(2e-2, gt=0, le=0.2)
    noise_floor: float = Field(1e-12, gt=0)


class TimesSection(_Section):
    grid: List[float] = list(defaults.time_grid)
    s: List[float] = list(defaults.s_grid)
    h: List[float] = list(defaults.h_grid)
    eps: List[float] = list(defaults.eps_list)

    @field_validator("grid")
    @classmethod
    def _increasing(cls, v):
        if not v or v[0] < 0 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("time grid must be nonnegative and strictly increasing")
        return v

    @field_validator("s")
    @classmethod
    def _unit_interval(cls, v):
        if any(not 0.0 <= s <= 1.0 for s in v):
            raise ValueError("interpolation times must lie in [0, 1]")
        return v

    @field_validator("h", "eps")
    @classmethod
    def _positive(cls, v):
        if not v or min(v) <= 0:
            raise ValueError("values must be positive")
        return v


class FunctionsSection(_Section):
    names: List[str] = []
    width: Optional[float] = Field(None, gt=0)


class MeasureSection(_Section):
    kind: Literal["gaussian"] = "gaussian"
    center: List[float]
    width: float = Field(defaults.measure_width, gt=0)


class SuiteSection(_Section):
    certifiers: List[str] = []
    pairs: List[Tuple[str, str]] = []
    seed: int = defaults.seed
    jobs: Optional[int] = Field(None, ge=1)
    params: Dict[str, Any] = {}


class OutputSection(_Section):
    dir: str = defaults.out_dir
    format: Literal["json", "csv", "both"] = defaults.output_format


class LabConfig(_Section):
    """A validated scenario file."""
    name: str = "scenario"
    model: ModelSection = ModelSection()
    chart: ChartSection = ChartSection()
    curvature: CurvatureSection = CurvatureSection()
    tolerances: ToleranceSection = ToleranceSection()
    times: TimesSection = TimesSection()
    functions: FunctionsSection = FunctionsSection()
    measures: Dict[str, MeasureSection] = {}
    suite: SuiteSection = SuiteSection()
    output: OutputSection = OutputSection()

    @property
    def fingerprint(self) -> str:
        """SHA-256 of the canonical config; output settings and job count excluded."""
        return fingerprint(self.model_dump(mode="json", exclude={"output": True,
                                                                 "suite": {"jobs"}}))

    def canonical(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


# --- loading ---------------------------------------------------------------

_TABLE_RE = re.compile(r"^\s*\[+\s*([^\]]+?)\s*\]+")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_\-\"']+)\s*=")
_DECODE_LINE_RE = re.compile(r"line (\d+)")


def locate_key(text: str, loc: Sequence[Any]) -> Optional[int]:
    """1-based line of the key at pydantic location loc, else of its table."""
    parts = [str(p) for p in loc if isinstance(p, str)]
    if not parts:
        return None
    table_line = None
    current = ""
    for number, line in enumerate(text.splitlines(), start=1):
        header = _TABLE_RE.match(line)
        if header:
            current = header.group(1).replace('"', "").replace("'", "")
            if current == ".".join(parts):
                table_line = number
            continue
        key = _KEY_RE.match(line)
        if key and key.group(1).strip("\"'") == parts[-1] and current == ".".join(parts[:-1]):
            return number
    if table_line is None and len(parts) > 1:
        return locate_key(text, parts[:-1])
    return table_line


def cross_check(config: LabConfig) -> Optional[Tuple[str, Tuple[str, ...]]]:
    """First inconsistency between tables as (message, location), or None."""
    model, chart = config.model, config.chart
    if model.family == "abelian_torus":
        if model.periods is not None and len(model.periods) != model.dimension:
            return "need one period per dimension", ("model", "periods")
    elif model.periods is not None:
        return "periods are only allowed for abelian_torus", ("model", "periods")
    if model.family != "heisenberg1":
        for key in ("lo", "hi", "shape"):
            value = getattr(chart, key)
            if value is not None and len(value) != model.dimension:
                return f"expected {model.dimension} entries", ("chart", key)
        if chart.lo is not None and chart.hi is not None:
            if any(b <= a for a, b in zip(chart.lo, chart.hi)):
                return "chart needs lo < hi on every axis", ("chart", "hi")
    curvature = config.curvature
    if curvature.kind == "tabulated":
        if len(curvature.knots) < 2 or len(curvature.knots) != len(curvature.values):
            return "tabulated curvature needs matching knots and values", ("curvature", "knots")
    for name, measure in config.measures.items():
        dim = 3 if model.family == "heisenberg1" else model.dimension
        if len(measure.center) != dim:
            return f"expected {dim} coordinates", ("measures", name, "center")
    for a, b in config.suite.pairs:
        if a not in config.measures or b not in config.measures:
            return f"pair ({a}, {b}) names an unknown measure", ("suite", "pairs")
    return None


def parse_config(text: str, path: Optional[str] = None) -> LabConfig:
    """Parse and validate TOML text; errors carry the offending line."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = _DECODE_LINE_RE.search(str(e))
        raise ConfigError(f"invalid TOML: {e}", int(match.group(1)) if match else None,
                          path) from None
    try:
        config = LabConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise ConfigError(f"{where}: {first['msg']}", locate_key(text, first["loc"]),
                          path) from None
    problem = cross_check(config)
    if problem is not None:
        msg, loc = problem
        raise ConfigError(f"{'.'.join(loc)}: {msg}", locate_key(text, loc), path)
    return config


def load_config(path: str) -> LabConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", path=path) from None
    return parse_config(text, path)
