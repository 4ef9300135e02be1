"""Generator factories: group models, charts, witness functions and measures.

`build_scenario(config)` turns a validated LabConfig into the read-only
Scenario shared by all certifiers.
"""
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..certify.base import Scenario, ToleranceSpec, WitnessFunction
from ..errors import ConfigError, InvalidInputError
from ..functionals import CurvatureFn, su2_curvature
from ..group_core import inverse, multiply
from ..types import DensityField, GridChart, GroupModel
from ..utils import debug_log
from .config import LabConfig, LabDefaults


def build_model(config: LabConfig) -> GroupModel:
    section = config.model
    if section.family == "heisenberg1":
        return GroupModel.heisenberg()
    if section.family == "abelian_torus":
        return GroupModel.torus(section.periods or [1.0] * section.dimension)
    return GroupModel.box(section.dimension)


def build_chart(config: LabConfig, model: GroupModel) -> GridChart:
    section = config.chart
    if model.is_heisenberg:
        return GridChart.heisenberg(section.spacing, section.half_nodes_xy, section.half_nodes_z,
                                    model)
    shape = section.shape or [LabDefaults.shape] * model.dimension
    if model.is_torus:
        return GridChart.torus(model, shape)
    lo = section.lo or [LabDefaults.box_lo] * model.dimension
    hi = section.hi or [LabDefaults.box_hi] * model.dimension
    return GridChart.box(model, lo, hi, shape)


def build_curvature(config: LabConfig) -> Optional[CurvatureFn]:
    """The configured c(t); None for kind "estimated"."""
    section = config.curvature
    if section.kind == "estimated":
        return None
    if section.kind == "su2":
        return su2_curvature() if section.C is None else su2_curvature(section.C)
    C = 1.0 if section.C is None else section.C
    if section.kind == "constant":
        return CurvatureFn.constant(C)
    if section.kind == "exponential":
        return CurvatureFn.exponential(C, section.K)
    return CurvatureFn.tabulated(section.knots, section.values)


# --- witness functions -------------------------------------------------------

def _heisenberg_gauge(p: np.ndarray, rho: float) -> np.ndarray:
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return np.exp(-(x * x + y * y) / rho ** 2 - 4.0 * z * z / rho ** 4)


def heisenberg_witnesses(rho: float = 1.0) -> List[WitnessFunction]:
    """linear_x plus coordinate monomials times a homogeneous Gaussian gauge."""
    monomials: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
        "gauge": lambda p: np.ones(p.shape[:-1]),
        "x_gauge": lambda p: p[..., 0],
        "y_gauge": lambda p: p[..., 1],
        "z_gauge": lambda p: p[..., 2],
        "xz_gauge": lambda p: p[..., 0] * p[..., 2],
        "yz_gauge": lambda p: p[..., 1] * p[..., 2],
        "x_plus_yz_gauge": lambda p: p[..., 0] + p[..., 1] * p[..., 2],
    }
    out = [WitnessFunction("linear_x", lambda p: p[..., 0])]
    for name, mono in monomials.items():
        out.append(WitnessFunction(
            name, lambda p, mono=mono: mono(p) * _heisenberg_gauge(p, rho),
            nonnegative=(name == "gauge")))
    return out


def box_witnesses(chart: GridChart, width: Optional[float] = None) -> List[WitnessFunction]:
    centre = chart.center
    extent = np.asarray(chart.hi) - np.asarray(chart.lo)
    w = width or 0.125 * float(extent[0])

    def gauss(p, shift=0.0):
        d = p - centre
        d[..., 0] -= shift
        return np.exp(-0.5 * np.sum(d * d, axis=-1) / w ** 2)

    second = (lambda p: (p[..., 0] - centre[0]) * (p[..., 1] - centre[1])) \
        if chart.model.dimension > 1 else (lambda p: (p[..., 0] - centre[0]) ** 2)
    return [
        WitnessFunction("linear_x", lambda p: p[..., 0] - centre[0]),
        WitnessFunction("gauss", lambda p: gauss(p), nonnegative=True),
        WitnessFunction("gauss_offset", lambda p: gauss(p, 0.5 * w), nonnegative=True),
        WitnessFunction("x_gauss", lambda p: (p[..., 0] - centre[0]) * gauss(p)),
        WitnessFunction("second_gauss", lambda p: second(p) * gauss(p)),
        WitnessFunction("cos_gauss",
                        lambda p: np.cos((p[..., 0] - centre[0]) / w) * gauss(p)),
    ]


def torus_witnesses(chart: GridChart) -> List[WitnessFunction]:
    periods = np.asarray(chart.model.periods)

    def angle(p, axis=0):
        return 2.0 * np.pi * p[..., axis] / periods[axis]

    last = chart.model.dimension - 1
    return [
        WitnessFunction("cos_x", lambda p: np.cos(angle(p))),
        WitnessFunction("sin_x", lambda p: np.sin(angle(p))),
        WitnessFunction("cos_sum", lambda p: np.cos(angle(p)) + np.cos(angle(p, last))),
        WitnessFunction("cos_prod", lambda p: np.cos(angle(p)) * np.cos(angle(p, last))),
        WitnessFunction("sin_2x", lambda p: np.sin(2.0 * angle(p))),
        WitnessFunction("exp_cos", lambda p: np.exp(np.cos(angle(p))), nonnegative=True),
    ]


def witness_functions(chart: GridChart, width: Optional[float] = None) -> List[WitnessFunction]:
    if chart.model.is_heisenberg:
        return heisenberg_witnesses(width or 1.0)
    if chart.model.is_torus:
        return torus_witnesses(chart)
    return box_witnesses(chart, width)


# --- measures ----------------------------------------------------------------

def gaussian_density(chart: GridChart, center, width: float) -> DensityField:
    """Normalized Gaussian bump; on H^1 the homogeneous gauge of c^-1 . p."""
    model = chart.model
    nodes = chart.nodes()
    c = np.asarray(center, dtype=float)
    if model.is_heisenberg:
        vals = _heisenberg_gauge(multiply(model, inverse(model, c), nodes), width)
    else:
        diff = nodes - c
        if model.is_torus:
            periods = np.asarray(model.periods)
            diff = diff - periods * np.round(diff / periods)
        vals = np.exp(-0.5 * np.sum(diff * diff, axis=-1) / width ** 2)
    field = DensityField(chart, vals)
    if field.mass <= 0:
        raise InvalidInputError(f"measure centred at {c.tolist()} has no mass on the chart")
    return field.normalized()


def default_measures(chart: GridChart) -> Dict[str, Tuple[List[float], float]]:
    """Two bumps placed symmetrically about the chart centre along the first axis."""
    centre = np.asarray(chart.center, dtype=float)
    offset = np.zeros_like(centre)
    offset[0] = LabDefaults.measure_offset
    return {"bump_a": ((centre - offset).tolist(), LabDefaults.measure_width),
            "bump_b": ((centre + offset).tolist(), LabDefaults.measure_width)}


def build_measures(config: LabConfig, chart: GridChart) -> Dict[str, DensityField]:
    specs = {name: (m.center, m.width) for name, m in config.measures.items()}
    specs = specs or default_measures(chart)
    return {name: gaussian_density(chart, center, width)
            for name, (center, width) in sorted(specs.items())}


def build_scenario(config: LabConfig) -> Scenario:
    model = build_model(config)
    chart = build_chart(config, model)
    names = config.functions.names
    witnesses = witness_functions(chart, config.functions.width)
    if names:
        known = {w.name for w in witnesses}
        missing = [n for n in names if n not in known]
        if missing:
            raise ConfigError(f"functions.names: unknown test function(s) {', '.join(missing)}")
        witnesses = [w for w in witnesses if w.name in names]
    measures = build_measures(config, chart)
    pairs = [tuple(p) for p in config.suite.pairs]
    if not pairs and len(measures) >= 2:
        first, second = sorted(measures)[:2]
        pairs = [(first, second)]
    times = config.times
    scenario = Scenario(
        name=config.name,
        model=model,
        chart=chart,
        curvature=build_curvature(config),
        test_functions=tuple(witnesses),
        measures=measures,
        measure_pairs=tuple(pairs),
        time_grid=tuple(times.grid),
        s_grid=tuple(times.s),
        h_grid=tuple(times.h),
        eps_list=tuple(times.eps),
        tolerances=ToleranceSpec(**config.tolerances.model_dump()),
        seed=config.suite.seed,
        window_fraction=config.chart.window,
        params=dict(config.suite.params),
        fingerprint=config.fingerprint,
    )
    debug_log(f"scenario {scenario.name}: {chart.describe()}, {len(witnesses)} witnesses, "
              f"{len(measures)} measures")
    return scenario
