"""Scenario configuration: schema parsing, validation, and code-embedded presets.

A scenario is a plain JSON document (see ``docs/scenario_schema.md``).
Presets are embedded here and version-pinned so acceptance runs cannot
drift with config edits; a config file may override individual keys on top
of a preset. Unknown keys are rejected with their full path, and all
cross-module invariants are checked at load so a run never starts from an
inconsistent configuration.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerGains
from .errors import ConfigurationError
from .estimator import ROBUST_HIGHGAIN, ROBUST_SLIDING, EstimatorGains
from .geometry import FeedbackRegion, contains
from .plant import DisturbanceModel, IntegratorConfig, PlantModel
from .supervisor import LyapunovBudget, Rates, compute_rates
from .trajectory import DesiredPath, PartitionWeights, SwitchingTrajectory, cushion

MAX_DWELL_GENERAL = "general"
MAX_DWELL_INTEGRATOR = "integrator"


@dataclass(frozen=True)
class SupervisorConfig:
    alpha: float = 0.25
    max_dwell: str = MAX_DWELL_GENERAL
    monitor_slack: float = 0.05

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError("supervisor.alpha must be >= 0")
        if self.max_dwell not in (MAX_DWELL_GENERAL, MAX_DWELL_INTEGRATOR):
            raise ConfigurationError(f"unknown max_dwell rule {self.max_dwell!r}")
        if self.monitor_slack < 0:
            raise ConfigurationError("supervisor.monitor_slack must be >= 0")


@dataclass(frozen=True)
class TrajectoryConfig:
    weights: PartitionWeights
    margin: float = 0.0
    intermediate_scale: float = 1.0

    def __post_init__(self):
        if self.margin < 0:
            raise ConfigurationError("trajectory.margin must be >= 0")
        if not 0.0 < self.intermediate_scale <= 1.0:
            raise ConfigurationError("trajectory.intermediate_scale must lie in (0, 1]")


@dataclass
class Scenario:
    """Full closed-loop configuration, validated as a whole."""

    n: int
    duration: float
    seed: int
    x0: np.ndarray
    xhat0: np.ndarray
    plant: PlantModel
    disturbance: DisturbanceModel
    estimator: EstimatorGains
    controller: ControllerGains
    budget: LyapunovBudget
    supervisor: SupervisorConfig
    region: FeedbackRegion
    path: DesiredPath
    trajectory: TrajectoryConfig
    integrator: IntegratorConfig
    reset_on_entry: bool = False
    warnings: list = field(default_factory=list)

    def rates(self) -> Rates:
        return compute_rates(self.controller, self.estimator, self.plant.lipschitz_c)

    def build_trajectory(self) -> SwitchingTrajectory:
        return SwitchingTrajectory(
            self.path,
            self.region,
            self.n,
            self.budget.v_max,
            margin=self.trajectory.margin,
            intermediate_scale=self.trajectory.intermediate_scale,
            weights=self.trajectory.weights,
        )

    def derived(self) -> dict:
        rates = self.rates()
        return {
            "lambda_s": rates.lambda_s,
            "lambda_u": rates.lambda_u,
            "c": rates.c,
            "k1_min": rates.k1_min,
            "k2_min": rates.k2_min,
            "v_max": self.budget.v_max,
            "v_threshold": self.budget.v_threshold,
            "d_bar": self.disturbance.d_bar,
        }

    def echo_lines(self) -> list[str]:
        d = self.derived()
        lines = [
            f"n = {self.n}, duration = {self.duration} s, dt = {self.integrator.dt} s, "
            f"seed = {self.seed}",
            f"lambda_s = {d['lambda_s']:.6g} 1/s, lambda_u = {d['lambda_u']:.6g} 1/s, "
            f"c = {d['c']:.6g} 1/s",
            f"v_max = {d['v_max']:.6g} m^2, v_threshold = {d['v_threshold']:.6g} m^2, "
            f"d_bar = {d['d_bar']:.6g} m/s",
            f"max-dwell rule = {self.supervisor.max_dwell}, alpha = {self.supervisor.alpha} s",
        ]
        lines += [f"warning: {w}" for w in self.warnings]
        return lines


def _as_matrix(value, n: int, where: str) -> np.ndarray:
    """Scalar -> s*I, 1-d of length n -> diag, 2-d n x n -> matrix."""
    if isinstance(value, (int, float)):
        return float(value) * np.eye(n)
    arr = np.asarray(value, dtype=float)
    if arr.shape == (n,):
        return np.diag(arr)
    if arr.shape == (n, n):
        return arr
    raise ConfigurationError(f"{where}: expected scalar, length-{n} vector, or {n}x{n} matrix")


def _matrix_out(m: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.asarray(m, dtype=float)]


_SECTION_KEYS = {
    "": {
        "n", "duration", "seed", "x0", "xhat0", "plant", "disturbance", "estimator",
        "controller", "budget", "supervisor", "region", "path", "trajectory", "integrator",
    },
    "plant": {"kind", "A", "lipschitz_c"},
    "disturbance": {"kind", "range", "d_bar"},
    "estimator": {"k2", "robust", "epsilon", "reset_on_entry"},
    "controller": {"k1"},
    "budget": {"z_max", "z_threshold"},
    "supervisor": {"alpha", "max_dwell", "monitor_slack"},
    "region": {"center", "radius", "position_dims"},
    "path": {"kind", "center", "radius", "omega", "initial_phase", "heading_dim", "fixed"},
    "trajectory": {"weights", "margin", "intermediate_scale"},
    "integrator": {"dt", "method"},
}


def _check_keys(section: str, data: dict) -> None:
    allowed = _SECTION_KEYS[section]
    unknown = sorted(set(data) - allowed)
    if unknown:
        prefix = f"{section}." if section else ""
        raise ConfigurationError(
            f"unknown config key(s): {', '.join(prefix + k for k in unknown)}"
        )


def _require(data: dict, key: str, section: str = ""):
    if key not in data:
        prefix = f"{section}." if section else ""
        raise ConfigurationError(f"missing config key: {prefix}{key}")
    return data[key]


def from_dict(raw: dict) -> Scenario:
    """Build and fully validate a scenario from its dict form."""
    if not isinstance(raw, dict):
        raise ConfigurationError("scenario config must be a JSON object")
    _check_keys("", raw)
    for section in (
        "plant", "disturbance", "estimator", "controller", "budget",
        "supervisor", "region", "path", "trajectory", "integrator",
    ):
        sec = _require(raw, section)
        if not isinstance(sec, dict):
            raise ConfigurationError(f"{section} must be an object")
        _check_keys(section, sec)

    n = int(_require(raw, "n"))
    if n < 2:
        raise ConfigurationError("n must be >= 2 (the region needs a 2-d position subspace)")
    duration = float(_require(raw, "duration"))
    if duration <= 0:
        raise ConfigurationError("duration must be > 0")
    seed = int(_require(raw, "seed"))

    x0 = np.asarray(_require(raw, "x0"), dtype=float)
    xhat0 = np.asarray(_require(raw, "xhat0"), dtype=float)
    if x0.shape != (n,) or xhat0.shape != (n,):
        raise ConfigurationError(f"x0 and xhat0 must have length n = {n}")

    p = raw["plant"]
    kind = _require(p, "kind", "plant")
    if kind == "linear":
        a = np.asarray(_require(p, "A", "plant"), dtype=float)
        if a.shape != (n, n):
            raise ConfigurationError(f"plant.A must be {n}x{n}")
        plant = PlantModel.linear(a, p.get("lipschitz_c"))
    elif kind == "single_integrator":
        if "A" in p:
            raise ConfigurationError("plant.A is not accepted for a single integrator")
        plant = PlantModel.single_integrator(n)
    else:
        raise ConfigurationError(f"unknown plant.kind {kind!r}")

    d = raw["disturbance"]
    dkind = _require(d, "kind", "disturbance")
    if dkind == "none":
        disturbance = DisturbanceModel.none(n)
    elif dkind == "uniform_box":
        rng_pair = _require(d, "range", "disturbance")
        if not (isinstance(rng_pair, (list, tuple)) and len(rng_pair) == 2):
            raise ConfigurationError("disturbance.range must be [low, high]")
        lo, hi = float(rng_pair[0]), float(rng_pair[1])
        disturbance = DisturbanceModel.uniform_box(
            np.full(n, lo), np.full(n, hi), float(_require(d, "d_bar", "disturbance"))
        )
    else:
        raise ConfigurationError(f"unknown disturbance.kind {dkind!r}")

    e = raw["estimator"]
    robust = e.get("robust", ROBUST_SLIDING)
    if robust not in (ROBUST_SLIDING, ROBUST_HIGHGAIN):
        raise ConfigurationError(f"unknown estimator.robust {robust!r}")
    estimator = EstimatorGains(
        k2=_as_matrix(_require(e, "k2", "estimator"), n, "estimator.k2"),
        d_bar=disturbance.d_bar,
        robust_kind=robust,
        epsilon=e.get("epsilon"),
    )
    reset_on_entry = bool(e.get("reset_on_entry", False))

    controller = ControllerGains(
        k1=_as_matrix(_require(raw["controller"], "k1", "controller"), n, "controller.k1")
    )

    b = raw["budget"]
    budget = LyapunovBudget.from_z(
        float(_require(b, "z_max", "budget")), float(_require(b, "z_threshold", "budget"))
    )

    s = raw["supervisor"]
    supervisor = SupervisorConfig(
        alpha=float(s.get("alpha", 0.25)),
        max_dwell=s.get("max_dwell", MAX_DWELL_GENERAL),
        monitor_slack=float(s.get("monitor_slack", 0.05)),
    )

    r = raw["region"]
    region = FeedbackRegion(
        center=np.asarray(_require(r, "center", "region"), dtype=float),
        radius=float(_require(r, "radius", "region")),
        position_dims=tuple(_require(r, "position_dims", "region")),
    )
    if max(region.position_dims) >= n:
        raise ConfigurationError(f"region.position_dims outside the state of size {n}")

    pa = raw["path"]
    heading = pa.get("heading_dim")
    path = DesiredPath(
        center=np.asarray(_require(pa, "center", "path"), dtype=float),
        radius=float(_require(pa, "radius", "path")),
        omega=float(_require(pa, "omega", "path")),
        initial_phase=float(pa.get("initial_phase", 0.0)),
        heading_dim=None if heading is None else int(heading),
        fixed=pa.get("fixed", {}),
        kind=pa.get("kind", "circle"),
    )
    if path.heading_dim is not None and not 0 <= path.heading_dim < n:
        raise ConfigurationError(f"path.heading_dim outside the state of size {n}")

    t = raw["trajectory"]
    w = _require(t, "weights", "trajectory")
    if not (isinstance(w, (list, tuple)) and len(w) == 4):
        raise ConfigurationError("trajectory.weights must be [p0, p1, p2, p3]")
    traj_cfg = TrajectoryConfig(
        weights=PartitionWeights(*[float(v) for v in w]),
        margin=float(t.get("margin", 0.0)),
        intermediate_scale=float(t.get("intermediate_scale", 1.0)),
    )

    ic = raw["integrator"]
    integrator = IntegratorConfig(
        dt=float(ic.get("dt", 1e-3)), method=ic.get("method", "rk4")
    )

    scenario = Scenario(
        n=n,
        duration=duration,
        seed=seed,
        x0=x0,
        xhat0=xhat0,
        plant=plant,
        disturbance=disturbance,
        estimator=estimator,
        controller=controller,
        budget=budget,
        supervisor=supervisor,
        region=region,
        path=path,
        trajectory=traj_cfg,
        integrator=integrator,
        reset_on_entry=reset_on_entry,
    )
    _cross_validate(scenario)
    return scenario


def _cross_validate(sc: Scenario) -> None:
    sc.rates()  # raises when the gain floors cannot dominate the drift
    if not contains(sc.region, sc.x0):
        raise ConfigurationError("x0 must start inside the feedback region")
    traj = sc.build_trajectory()  # checks 2-d subspace, scale, weights
    traj.validate_path_outside()
    # cushion feasibility at a representative boundary point (concentric geometry
    # makes every boundary point equivalent)
    points = traj.curve_points(0.0)
    cushion(sc.region, points["boundary"], sc.budget.v_max, sc.trajectory.margin)
    if sc.estimator.robust_kind == ROBUST_HIGHGAIN:
        if not sc.budget.epsilon_compatible(sc.estimator.epsilon):
            # The worst-case analysis cannot certify convergence below the
            # epsilon floor; the run proceeds and the monitor arbitrates.
            sc.warnings.append(
                f"high-gain epsilon {sc.estimator.epsilon} exceeds v_threshold "
                f"{sc.budget.v_threshold}: threshold convergence is not certified "
                f"by the worst-case analysis"
            )
    if sc.supervisor.max_dwell == MAX_DWELL_INTEGRATOR and sc.plant.kind != "single_integrator":
        raise ConfigurationError(
            "supervisor.max_dwell = 'integrator' requires a single-integrator plant"
        )


def to_dict(sc: Scenario) -> dict:
    """Loss-free dict form; ``from_dict(to_dict(sc))`` reproduces the scenario."""
    plant: dict = {"kind": sc.plant.kind}
    if sc.plant.kind == "linear":
        plant["A"] = _matrix_out(sc.plant.a_matrix)
        plant["lipschitz_c"] = sc.plant.lipschitz_c
    disturbance: dict = {"kind": sc.disturbance.kind}
    if sc.disturbance.kind == "uniform_box":
        disturbance["range"] = [float(sc.disturbance.low[0]), float(sc.disturbance.high[0])]
        disturbance["d_bar"] = sc.disturbance.d_bar
    estimator = {
        "k2": _matrix_out(sc.estimator.k2),
        "robust": sc.estimator.robust_kind,
        "reset_on_entry": sc.reset_on_entry,
    }
    if sc.estimator.epsilon is not None:
        estimator["epsilon"] = sc.estimator.epsilon
    path = {
        "kind": sc.path.kind,
        "center": [float(v) for v in sc.path.center],
        "radius": sc.path.radius,
        "omega": sc.path.omega,
        "initial_phase": sc.path.initial_phase,
        "heading_dim": sc.path.heading_dim,
        "fixed": {str(k): v for k, v in sc.path.fixed.items()},
    }
    w = sc.trajectory.weights
    return {
        "n": sc.n,
        "duration": sc.duration,
        "seed": sc.seed,
        "x0": [float(v) for v in sc.x0],
        "xhat0": [float(v) for v in sc.xhat0],
        "plant": plant,
        "disturbance": disturbance,
        "estimator": estimator,
        "controller": {"k1": _matrix_out(sc.controller.k1)},
        "budget": {"z_max": sc.budget.z_max, "z_threshold": sc.budget.z_threshold},
        "supervisor": {
            "alpha": sc.supervisor.alpha,
            "max_dwell": sc.supervisor.max_dwell,
            "monitor_slack": sc.supervisor.monitor_slack,
        },
        "region": {
            "center": [float(v) for v in sc.region.center],
            "radius": sc.region.radius,
            "position_dims": list(sc.region.position_dims),
        },
        "path": path,
        "trajectory": {
            "weights": [w.p0, w.p1, w.p2, w.p3],
            "margin": sc.trajectory.margin,
            "intermediate_scale": sc.trajectory.intermediate_scale,
        },
        "integrator": {"dt": sc.integrator.dt, "method": sc.integrator.method},
    }


def parse_config(path: str) -> Scenario:
    """Load and validate a scenario from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"malformed config {path}: {exc}") from exc
    return from_dict(raw)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def sim_circle_preset() -> dict:
    """Desk-scale closed loop: linear drift, sliding-mode robustifier.

    The disturbance is a symmetric per-component uniform box; its norm
    bound is the box diagonal. The path's initial phase starts the tangent
    heading aligned with the initial estimate heading.
    """
    return {
        "n": 3,
        "duration": 30.0,
        "seed": 0,
        "x0": [0.1, 0.2, 0.0],
        "xhat0": [0.2, 0.3, math.pi / 6.0],
        "plant": {"kind": "linear", "A": _matrix_out(0.5 * np.eye(3)), "lipschitz_c": 0.5},
        "disturbance": {"kind": "uniform_box", "range": [-0.06, 0.06], "d_bar": 0.06 * math.sqrt(3.0)},
        "estimator": {"k2": 3.0, "robust": "sliding", "reset_on_entry": False},
        "controller": {"k1": 3.0},
        "budget": {"z_max": 0.9, "z_threshold": 0.02},
        "supervisor": {"alpha": 0.25, "max_dwell": "general", "monitor_slack": 0.05},
        "region": {"center": [0.0, 0.0], "radius": 1.0, "position_dims": [0, 1]},
        "path": {
            "kind": "circle",
            "center": [0.0, 0.0],
            "radius": 2.0,
            "omega": math.pi / 5.0,
            "initial_phase": -math.pi / 3.0,
            "heading_dim": 2,
            "fixed": {},
        },
        "trajectory": {"weights": [0.0, 0.3, 0.4, 0.3], "margin": 0.0, "intermediate_scale": 1.0},
        "integrator": {"dt": 1e-3, "method": "rk4"},
    }


def quad_integrator_preset() -> dict:
    """Hover-craft-style single integrator with the high-gain robustifier.

    Simulated counterpart of a planar excursion flown at constant altitude;
    the inbound/outbound targets are pulled to 0.7 of the boundary radius
    so tracking error cannot push the state out prematurely.
    """
    return {
        "n": 4,
        "duration": 185.0,
        "seed": 0,
        "x0": [0.25, -0.1, 1.05, math.pi / 2.0 + 0.1],
        "xhat0": [0.25, -0.1, 1.05, math.pi / 2.0 + 0.1],
        "plant": {"kind": "single_integrator"},
        "disturbance": {"kind": "uniform_box", "range": [-0.0175, 0.0175], "d_bar": 0.035},
        "estimator": {"k2": 0.6, "robust": "highgain", "epsilon": 0.1, "reset_on_entry": False},
        "controller": {"k1": 0.4},
        "budget": {"z_max": 0.9, "z_threshold": 0.14},
        "supervisor": {"alpha": 0.25, "max_dwell": "integrator", "monitor_slack": 0.05},
        "region": {"center": [0.0, 0.0], "radius": 1.0, "position_dims": [0, 1]},
        "path": {
            "kind": "circle",
            "center": [0.0, 0.0],
            "radius": 1.5,
            "omega": math.pi / 15.0,
            "initial_phase": 0.0,
            "heading_dim": 3,
            "fixed": {"2": 1.0},
        },
        "trajectory": {"weights": [0.0, 0.4, 0.2, 0.4], "margin": 0.0, "intermediate_scale": 0.7},
        "integrator": {"dt": 1e-3, "method": "rk4"},
    }


PRESETS = {
    "sim-circle": sim_circle_preset,
    "quad-integrator": quad_integrator_preset,
}


def load_scenario(
    preset: str | None = None,
    config_path: str | None = None,
    overrides: dict | None = None,
) -> Scenario:
    """Resolve preset + config file + programmatic overrides into a Scenario."""
    if preset is None and config_path is None:
        raise ConfigurationError("either a preset or a config file is required")
    raw: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(
                f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        raw = PRESETS[preset]()
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            try:
                file_raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"malformed config {config_path}: {exc}") from exc
        raw = _deep_merge(raw, file_raw) if raw else file_raw
    if overrides:
        raw = _deep_merge(raw, overrides)
    return from_dict(raw)
