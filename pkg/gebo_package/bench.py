import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from gebo_package import bench_constants as C
from gebo_package.external import DEFAULT_TIMEOUT, ExternalObjective
from gebo_package.space import Configuration, MixedSpace, continuous, discrete, load_space, sample_uniform, validate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Task:
    """
    A maximization-oriented objective over a mixed space.
    """

    name: str
    space: MixedSpace
    objective: Callable[[Configuration], float]
    description: str = ""
    known_optimum: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, cfg: Configuration) -> float:
        return float(self.objective(cfg))

    def close(self) -> None:
        closer = getattr(self.objective, "close", None)
        if callable(closer):
            closer()


def _penalty(violations: Sequence[float]) -> float:
    return C.PENALTY_COEFFICIENT * float(sum(max(0.0, g) for g in violations))


def _map_unit(u: float, domain: Tuple[float, float]) -> float:
    lo, hi = domain
    return lo + (u + 1.0) * 0.5 * (hi - lo)


# Func2C
def beale(x: float, y: float) -> float:
    return (1.5 - x + x * y) ** 2 + (2.25 - x + x * y ** 2) ** 2 + (2.625 - x + x * y ** 3) ** 2


def six_hump_camel(x: float, y: float) -> float:
    return (4.0 - 2.1 * x ** 2 + x ** 4 / 3.0) * x ** 2 + x * y + (-4.0 + 4.0 * y ** 2) * y ** 2


def rosenbrock(x: float, y: float) -> float:
    return (1.0 - x) ** 2 + 100.0 * (y - x ** 2) ** 2


FUNC2C_COMPONENTS = (
    (beale, C.BEALE_DOMAIN),
    (six_hump_camel, C.CAMEL_DOMAIN),
    (rosenbrock, C.ROSENBROCK_DOMAIN),
)


def func2c_space() -> MixedSpace:
    return MixedSpace((discrete("selector0", 3), discrete("selector1", 3), continuous("x0", -1, 1), continuous("x1", -1, 1)))


def func2c(cfg: Configuration) -> float:
    """
    Negated sum of the two benchmark functions picked by the selectors, evaluated
    on the continuous pair mapped to each function's canonical domain.
    """
    d0, d1, u0, u1 = cfg.values
    total = 0.0
    for selector in (int(d0), int(d1)):
        fn, (dx, dy) = FUNC2C_COMPONENTS[selector]
        total += fn(_map_unit(u0, dx), _map_unit(u1, dy))
    return -total


# Ackley
def ackley(v: Sequence[float]) -> float:
    x = np.asarray(v, dtype=float)
    a, b, c = C.ACKLEY_A, C.ACKLEY_B, C.ACKLEY_C
    value = (
        -a * math.exp(-b * math.sqrt(np.mean(x ** 2)))
        - math.exp(np.mean(np.cos(c * x)))
        + a
        + math.e
    )
    return max(value, 0.0)


def ackley_space(n_bin: int, n_cont: int) -> MixedSpace:
    variables = [discrete(f"b{i}", 2) for i in range(n_bin)]
    variables += [continuous(f"c{i}", -1, 1) for i in range(n_cont)]
    return MixedSpace(tuple(variables))


def ackley_mixed(cfg: Configuration, n_bin: int = 50, n_cont: int = 3) -> float:
    """Negated Ackley over binary values {0, 1} followed by continuous values in [-1, 1]."""
    values = cfg.values
    if len(values) != n_bin + n_cont:
        raise ValueError(f"expected {n_bin + n_cont} values, got {len(values)}")
    return -ackley([float(v) for v in values])


# Pressure vessel
def vessel_thickness(index: int) -> float:
    return C.VESSEL_THICKNESS_STEP * (int(index) + 1)


def pressure_vessel_cost(x1: float, x2: float, x3: float, x4: float) -> float:
    a, b, c, d = C.VESSEL_COST
    return a * x1 * x3 * x4 + b * x2 * x3 ** 2 + c * x1 ** 2 * x4 + d * x1 ** 2 * x3


def pressure_vessel_violations(x1: float, x2: float, x3: float, x4: float) -> Tuple[float, ...]:
    return (
        -x1 + C.VESSEL_SHELL_RATIO * x3,
        -x2 + C.VESSEL_HEAD_RATIO * x3,
        -math.pi * x3 ** 2 * x4 - (4.0 / 3.0) * math.pi * x3 ** 3 + C.VESSEL_MIN_VOLUME,
        x4 - C.VESSEL_MAX_LENGTH,
    )


def pressure_vessel_space() -> MixedSpace:
    return MixedSpace((
        discrete("shell_thickness", C.VESSEL_THICKNESS_LEVELS),
        discrete("head_thickness", C.VESSEL_THICKNESS_LEVELS),
        continuous("inner_radius", *C.VESSEL_RADIUS_BOUNDS),
        continuous("length", *C.VESSEL_LENGTH_BOUNDS),
    ))


def pressure_vessel(cfg: Configuration) -> float:
    i1, i2, x3, x4 = cfg.values
    x1, x2 = vessel_thickness(i1), vessel_thickness(i2)
    cost = pressure_vessel_cost(x1, x2, x3, x4)
    return -(cost + _penalty(pressure_vessel_violations(x1, x2, x3, x4)))


# Speed reducer
def golinski_weight(x1, x2, x3, x4, x5, x6, x7) -> float:
    """Weight of the speed reducer (face width, module, teeth, shaft lengths, shaft diameters)."""
    return (
        0.7854 * x1 * x2 ** 2 * (3.3333 * x3 ** 2 + 14.9334 * x3 - 43.0934)
        - 1.508 * x1 * (x6 ** 2 + x7 ** 2)
        + 7.4777 * (x6 ** 3 + x7 ** 3)
        + 0.7854 * (x4 * x6 ** 2 + x5 * x7 ** 2)
    )


def golinski_violations(x1, x2, x3, x4, x5, x6, x7) -> Tuple[float, ...]:
    return (
        27.0 / (x1 * x2 ** 2 * x3) - 1.0,
        397.5 / (x1 * x2 ** 2 * x3 ** 2) - 1.0,
        1.93 * x4 ** 3 / (x2 * x3 * x6 ** 4) - 1.0,
        1.93 * x5 ** 3 / (x2 * x3 * x7 ** 4) - 1.0,
        math.sqrt((745.0 * x4 / (x2 * x3)) ** 2 + 16.9e6) / (110.0 * x6 ** 3) - 1.0,
        math.sqrt((745.0 * x5 / (x2 * x3)) ** 2 + 157.5e6) / (85.0 * x7 ** 3) - 1.0,
        x2 * x3 / 40.0 - 1.0,
        5.0 * x2 / x1 - 1.0,
        x1 / (12.0 * x2) - 1.0,
        (1.5 * x6 + 1.9) / x4 - 1.0,
        (1.1 * x7 + 1.9) / x5 - 1.0,
    )


def speed_reducer_space() -> MixedSpace:
    return MixedSpace((
        discrete("pinion_teeth", len(C.REDUCER_TEETH)),
        continuous("face_width", *C.REDUCER_FACE_WIDTH),
        continuous("teeth_module", *C.REDUCER_MODULE),
        continuous("shaft1_length", *C.REDUCER_SHAFT1_LENGTH),
        continuous("shaft2_length", *C.REDUCER_SHAFT2_LENGTH),
        continuous("shaft1_diameter", *C.REDUCER_SHAFT1_DIAMETER),
        continuous("shaft2_diameter", *C.REDUCER_SHAFT2_DIAMETER),
    ))


def speed_reducer(cfg: Configuration) -> float:
    teeth_index, x1, x2, x4, x5, x6, x7 = cfg.values
    x3 = C.REDUCER_TEETH[int(teeth_index)]
    weight = golinski_weight(x1, x2, x3, x4, x5, x6, x7)
    return -(weight + _penalty(golinski_violations(x1, x2, x3, x4, x5, x6, x7)))


# Environment calibration
def pollutant_concentration(s: float, t: float, mass: float, diffusion: float, location: float, tau: float) -> float:
    """Concentration at position s and time t after two spills, the second at location L and time tau."""
    value = mass / math.sqrt(4.0 * math.pi * diffusion * t) * math.exp(-s ** 2 / (4.0 * diffusion * t))
    if t > tau:
        dt = t - tau
        value += mass / math.sqrt(4.0 * math.pi * diffusion * dt) * math.exp(-(s - location) ** 2 / (4.0 * diffusion * dt))
    return value


def env_calibration_space(tau_levels: int = C.ENV_TAU_LEVELS) -> MixedSpace:
    return MixedSpace((
        discrete("tau", tau_levels),
        continuous("mass", *C.ENV_MASS_BOUNDS),
        continuous("diffusion", *C.ENV_DIFFUSION_BOUNDS),
        continuous("location", *C.ENV_LOCATION_BOUNDS),
    ))


def env_calibration(
    cfg: Configuration,
    tau_start: float = C.ENV_TAU_START,
    tau_step: float = C.ENV_TAU_STEP,
    true_parameters: Optional[Dict[str, float]] = None,
) -> float:
    """
    Negated squared error between the model concentrations at cfg and at the true
    parameters, summed over the fixed (s, t) observation grid.
    """
    truth = true_parameters or C.ENV_TRUE_PARAMETERS
    tau_index, mass, diffusion, location = cfg.values
    tau = round(tau_start + tau_step * int(tau_index), 10)

    error = 0.0
    for s in C.ENV_SPACE_GRID:
        for t in C.ENV_TIME_GRID:
            observed = pollutant_concentration(s, t, truth["mass"], truth["diffusion"], truth["location"], truth["tau"])
            error += (pollutant_concentration(s, t, mass, diffusion, location, tau) - observed) ** 2
    return -error


# Planted hub
def planted_hub_space(n_vars: int) -> MixedSpace:
    """Even positions are 5-level discrete variables, odd positions continuous in [-1, 1]."""
    variables = [
        discrete(f"v{i}", 5) if i % 2 == 0 else continuous(f"v{i}", -1.0, 1.0)
        for i in range(n_vars)
    ]
    return MixedSpace(tuple(variables))


def _signed_unit(value: float, space: MixedSpace, index: int) -> float:
    var = space.variables[index]
    if var.is_discrete:
        return 2.0 * float(value) / (var.cardinality - 1) - 1.0
    lo, hi = var.bounds
    return 2.0 * (float(value) - lo) / (hi - lo) - 1.0


def nearest_hub(index: int, hubs: Sequence[int]) -> int:
    return min(sorted(hubs), key=lambda h: abs(h - index))


def planted_hub(cfg: Configuration, hubs: Sequence[int], space: MixedSpace) -> float:
    """
    Sum over non-hub variables of the product of its signed unit value with that of
    its nearest hub (lower hub on ties); neutral values score 0.
    """
    u = [_signed_unit(v, space, i) for i, v in enumerate(cfg.values)]
    hub_set = set(hubs)
    return float(sum(u[nearest_hub(j, hubs)] * u[j] for j in range(space.dim) if j not in hub_set))


# Registry
def make_func2c() -> Task:
    return Task(
        name="func2c",
        space=func2c_space(),
        objective=func2c,
        description="Two selectors over beale / six-hump camel / rosenbrock, two continuous inputs",
        known_optimum=-2.0 * C.CAMEL_MINIMUM,
    )


def make_ackley(n_bin: int = 50, n_cont: int = 3) -> Task:
    return Task(
        name=f"ackley{n_bin + n_cont}c",
        space=ackley_space(n_bin, n_cont),
        objective=partial(ackley_mixed, n_bin=n_bin, n_cont=n_cont),
        description=f"Negated Ackley, {n_bin} binary + {n_cont} continuous variables",
        known_optimum=0.0,
    )


def make_pressure_vessel() -> Task:
    return Task(
        name="pressure_vessel",
        space=pressure_vessel_space(),
        objective=pressure_vessel,
        description="Negated penalized cost of a cylindrical pressure vessel",
        metadata={"minimize": True},
    )


def make_speed_reducer() -> Task:
    return Task(
        name="speed_reducer",
        space=speed_reducer_space(),
        objective=speed_reducer,
        description="Negated penalized Golinski speed-reducer weight",
        metadata={"minimize": True},
    )


def make_env_calibration(
    tau_levels: int = C.ENV_TAU_LEVELS, tau_start: float = C.ENV_TAU_START, tau_step: float = C.ENV_TAU_STEP
) -> Task:
    return Task(
        name="env_calibration",
        space=env_calibration_space(tau_levels),
        objective=partial(env_calibration, tau_start=tau_start, tau_step=tau_step),
        description="Calibration of a two-spill pollutant diffusion model",
        known_optimum=0.0,
        metadata={"minimize": True, "discretized_parameter": "tau", "tau_start": tau_start, "tau_step": tau_step},
    )


def make_planted_hub(n_vars: int = 10, hubs: Sequence[int] = (2, 7)) -> Task:
    if n_vars < 3:
        raise ValueError("the planted-hub task needs at least 3 variables")
    space = planted_hub_space(n_vars)
    validate(space)
    if not hubs or any(not 0 <= h < n_vars for h in hubs):
        raise ValueError(f"hubs {hubs} must be non-empty and inside [0, {n_vars})")
    return Task(
        name=f"planted_hub{n_vars}",
        space=space,
        objective=partial(planted_hub, hubs=tuple(hubs), space=space),
        description=f"Pairwise couplings through hub variables {tuple(hubs)}",
        known_optimum=float(n_vars - len(set(hubs))),
        metadata={"hubs": list(hubs)},
    )


TASKS: Dict[str, Callable[..., Task]] = {
    "func2c": make_func2c,
    "ackley53c": partial(make_ackley, 50, 3),
    "ackley20c": partial(make_ackley, 17, 3),
    "pressure_vessel": make_pressure_vessel,
    "speed_reducer": make_speed_reducer,
    "env_calibration": make_env_calibration,
    "planted_hub": partial(make_planted_hub, 10, (2, 7)),
    "planted_hub4": partial(make_planted_hub, 4, (1,)),
}


def get_task(
    task_id: str,
    space_path: Optional[str] = None,
    minimize: bool = False,
    timeout: float = DEFAULT_TIMEOUT,
    **overrides: Any,
) -> Task:
    """
    Resolves a registered task, or `ext:<command>` for an external objective.

    Args:
        task_id (str): Registry key or `ext:<command>`.
        space_path (str, optional): Space file, required for external objectives.
        minimize (bool): External objective reports values to minimize (negated here).
        timeout (float): Per-evaluation timeout of an external objective.

    Returns:
        Task: The task.
    """
    if task_id.startswith("ext:"):
        if space_path is None:
            raise ValueError("external objectives need a space file")
        external = ExternalObjective(task_id[len("ext:"):], timeout=timeout)
        objective: Callable[[Configuration], float] = external
        if minimize:
            objective = _Negated(external)
        return Task(
            name=task_id,
            space=load_space(space_path),
            objective=objective,
            description="external black-box objective",
            metadata={"minimize": minimize, "external": True},
        )

    if task_id not in TASKS:
        raise KeyError(f"unknown task '{task_id}', available: {sorted(TASKS)}")
    return TASKS[task_id](**overrides)


class _Negated:
    def __init__(self, inner):
        self.inner = inner

    def __call__(self, cfg: Configuration) -> float:
        return -self.inner(cfg)

    def close(self) -> None:
        self.inner.close()


def random_search_baseline(task: Task, n_samples: int, seed: int = 0) -> Dict[str, Any]:
    """
    Best value among `n_samples` uniform random configurations.

    Returns:
        Dict[str, Any]: best value, its configuration, and the sample count.
    """
    rng = np.random.default_rng(seed)
    best_value, best_cfg = -math.inf, None
    for _ in range(n_samples):
        cfg = sample_uniform(task.space, rng)
        value = task(cfg)
        if value > best_value:
            best_value, best_cfg = value, cfg
    return {"task": task.name, "best_value": best_value, "best_values": list(best_cfg.values), "n_samples": n_samples}
