"""Switching-trajectory generation.

The reference alternates between a cushion point inside the feedback region
and the desired path outside it, blended with the smootherstep quintic so
value, slope, and curvature match at every seam. One cycle is laid out as:

* available phase: blend from the cushion point out to the (optionally
  scaled) boundary target over the planned stay,
* denied phase, three partitions of the planned absence: blend from the
  boundary target out to the path, follow the path exactly, blend from the
  path back to the cushion point.

The boundary target ``x_b(t)`` is the radial projection of the current path
point onto the region boundary, which breaks the apparent circularity of
defining the reference through its own projection; the cushion point sits a
reachability-ball radius (plus margin) further along the inward normal so
the true state is guaranteed back inside the region when the maximum
absence elapses.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from . import supervisor as _sup
from .errors import ConfigurationError, ContractViolationError, InfeasibleScenarioError
from .geometry import FeedbackRegion, inward_normal, signed_distance


def smootherstep(rho: float) -> float:
    """Quintic step ``6r^5 - 15r^4 + 10r^3``; the input is clamped to [0, 1]."""
    rho = min(1.0, max(0.0, float(rho)))
    return float(_k.smootherstep_poly(rho))


def smootherstep_d1(rho: float) -> float:
    """First derivative of the quintic; zero at both endpoints exactly."""
    rho = min(1.0, max(0.0, float(rho)))
    return float(_k.smootherstep_poly_d1(rho))


def smootherstep_d2(rho: float) -> float:
    """Second derivative of the quintic; zero at both endpoints exactly."""
    rho = min(1.0, max(0.0, float(rho)))
    return float(_k.smootherstep_poly_d2(rho))


def blend(s: float, q: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Convex combination ``s*q + (1-s)*r`` of two reference points."""
    if not 0.0 <= s <= 1.0:
        raise ContractViolationError(f"blend weight must lie in [0, 1], got {s}")
    return s * np.asarray(q, dtype=float) + (1.0 - s) * np.asarray(r, dtype=float)


def cushion(
    region: FeedbackRegion, x_b: np.ndarray, v_max: float, margin: float = 0.0
) -> np.ndarray:
    """Cushion point: ``x_b`` pushed ``2*sqrt(v_max) + margin`` along the inward normal.

    Verifies that the reachability ball of radius ``2*sqrt(v_max)`` around
    the result stays inside the region; raises
    :class:`InfeasibleScenarioError` (reporting the achieved clearance)
    when the region is too small to contain it.
    """
    if margin < 0:
        raise ConfigurationError(f"margin must be >= 0, got {margin}")
    ball = 2.0 * math.sqrt(v_max)
    offset = ball + margin
    x_eps = np.asarray(x_b, dtype=float) + offset * inward_normal(region, x_b)
    clearance = -signed_distance(region, x_eps) - ball
    if clearance < -1e-12:
        raise InfeasibleScenarioError(
            f"region of radius {region.radius} cannot contain the reachability ball: "
            f"clearance {clearance:.6g} m (ball radius {ball:.6g} m, offset {offset:.6g} m)"
        )
    return x_eps


@dataclass(frozen=True)
class DesiredPath:
    """Parametric circular path in the 2-d position subspace, with analytic rate.

    ``heading_dim``, when set, carries the path tangent direction as an
    extra state component; ``fixed`` pins any remaining components to
    constants (e.g. a flight altitude).
    """

    center: np.ndarray
    radius: float
    omega: float
    initial_phase: float = 0.0
    heading_dim: int | None = None
    fixed: dict = field(default_factory=dict)
    kind: str = "circle"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "fixed", {int(k): float(v) for k, v in self.fixed.items()})
        if self.kind != "circle":
            raise ConfigurationError(f"unsupported path kind {self.kind!r}")
        if self.radius <= 0:
            raise ConfigurationError(f"path radius must be > 0, got {self.radius}")
        if self.center.shape != (2,):
            raise ConfigurationError(f"path center must be 2-d, got shape {self.center.shape}")

    def evaluate(self, t: float, n: int, position_dims: tuple) -> tuple[np.ndarray, np.ndarray]:
        """Desired state on the path and its time derivative."""
        ang = self.omega * t + self.initial_phase
        point = np.zeros(n)
        rate = np.zeros(n)
        for dim, value in self.fixed.items():
            point[dim] = value
        p0, p1 = position_dims
        point[p0] = self.center[0] + self.radius * math.cos(ang)
        point[p1] = self.center[1] + self.radius * math.sin(ang)
        rate[p0] = -self.radius * self.omega * math.sin(ang)
        rate[p1] = self.radius * self.omega * math.cos(ang)
        if self.heading_dim is not None:
            point[self.heading_dim] = ang + self.tangent_offset()
            rate[self.heading_dim] = self.omega
        return point, rate

    def tangent_offset(self) -> float:
        """Angular offset from the path phase to the tangent heading."""
        if self.omega > 0:
            return 0.5 * math.pi
        if self.omega < 0:
            return -0.5 * math.pi
        return 0.0


@dataclass(frozen=True)
class PartitionWeights:
    """Weights splitting the denied-phase duration into its three moving parts.

    ``p0`` delays the outbound blend, ``p1``/``p3`` are the out/in blends
    and must be positive (a zero-length blend between distinct endpoints
    would be a jump), ``p2`` is the exact path-following share.
    """

    p0: float
    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        ps = (self.p0, self.p1, self.p2, self.p3)
        if any(p < 0 or p >= 1 for p in ps):
            raise ConfigurationError(f"each weight must lie in [0, 1), got {ps}")
        if abs(sum(ps) - 1.0) > 1e-12:
            raise ConfigurationError(f"weights must sum to 1, got {sum(ps)!r}")
        if self.p1 == 0.0 or self.p3 == 0.0:
            raise ConfigurationError(
                "blend partitions p1 and p3 must be positive: a zero-duration blend "
                "between distinct endpoints is a discontinuity"
            )

    def cumulative(self) -> np.ndarray:
        return np.cumsum([self.p0, self.p1, self.p2, self.p3])


@dataclass
class CyclePlan:
    """One excursion's schedule, filled in two stages.

    Created at a detected entry with the planned stay; completed when the
    denied-phase duration is fixed at the scheduled departure. Partition
    instants are exact multiples of the denied duration.
    """

    index: int
    t_entry: float
    v_entry: float
    dt_available: float
    intermediate_scale: float
    t_depart: float | None = None
    v_depart: float | None = None
    e2_depart_norm: float | None = None
    dt_denied: float | None = None
    t_part1: float | None = None
    t_part2: float | None = None
    t_part3: float | None = None
    boundary_target: np.ndarray | None = None
    cushion_point: np.ndarray | None = None

    @property
    def complete(self) -> bool:
        return self.dt_denied is not None


def partition_times(anchor: float, dt_denied: float, weights: PartitionWeights):
    """Absolute partition instants: exact cumulative-weight multiples of the duration."""
    cum = weights.cumulative()
    return (
        float(anchor + cum[1] * dt_denied),
        float(anchor + cum[2] * dt_denied),
        float(anchor + cum[3] * dt_denied),
    )


def open_cycle(
    index: int,
    t_entry: float,
    v_entry: float,
    budget,
    rates,
    alpha: float,
    intermediate_scale: float = 1.0,
    grid_dt: float | None = None,
) -> CyclePlan:
    """Start a cycle at a detected entry: fixes the planned stay with feedback.

    With ``grid_dt`` the stay is rounded up to the step grid (a longer stay
    never violates the minimum-dwell condition).
    """
    dt_available = _sup.min_dwell(v_entry, budget, rates, alpha)
    if grid_dt is not None:
        dt_available = max(math.ceil(dt_available / grid_dt - 1e-12), 1) * grid_dt
    return CyclePlan(
        index=index,
        t_entry=t_entry,
        v_entry=v_entry,
        dt_available=dt_available,
        intermediate_scale=intermediate_scale,
    )


def close_cycle(
    plan: CyclePlan,
    t_depart: float,
    v_depart: float,
    e2_depart_norm: float,
    budget,
    rates,
    d_bar: float,
    weights: PartitionWeights,
    single_integrator_rule: bool = False,
    grid_dt: float | None = None,
) -> CyclePlan:
    """Fix the planned absence and its partition schedule at departure.

    With ``grid_dt`` the absence is rounded down to the step grid (a shorter
    absence never violates the maximum-dwell condition). Returns the same
    plan, completed.
    """
    if single_integrator_rule:
        dt_denied = _sup.max_dwell_single_integrator(
            v_depart, e2_depart_norm, budget.v_max, d_bar
        )
    else:
        dt_denied = _sup.max_dwell(v_depart, budget, rates, d_bar)
    if grid_dt is not None and math.isfinite(dt_denied):
        dt_denied = math.floor(dt_denied / grid_dt + 1e-12) * grid_dt
    plan.t_depart = t_depart
    plan.v_depart = v_depart
    plan.e2_depart_norm = e2_depart_norm
    plan.dt_denied = dt_denied
    if math.isfinite(dt_denied):
        plan.t_part1, plan.t_part2, plan.t_part3 = partition_times(t_depart, dt_denied, weights)
    return plan


class SwitchingTrajectory:
    """Evaluates the active segment schedule for one closed-loop run.

    Holds the static geometry (path, region, cushion offset, intermediate
    scale) packed for the kernels; the engine installs a fresh segment
    anchor per phase between steps. Evaluation is pure.
    """

    def __init__(
        self,
        path: DesiredPath,
        region: FeedbackRegion,
        n: int,
        v_max: float,
        margin: float = 0.0,
        intermediate_scale: float = 1.0,
        weights: PartitionWeights | None = None,
    ):
        if len(region.position_dims) != 2:
            raise ConfigurationError(
                "the switching trajectory requires a 2-d position subspace, got "
                f"dims {region.position_dims}"
            )
        if not 0.0 < intermediate_scale <= 1.0:
            raise ConfigurationError(
                f"intermediate_scale must lie in (0, 1], got {intermediate_scale}"
            )
        if path.heading_dim is not None and path.heading_dim in region.position_dims:
            raise ConfigurationError("heading_dim cannot be a position dim")
        self.path = path
        self.region = region
        self.n = n
        self.v_max = v_max
        self.margin = margin
        self.intermediate_scale = intermediate_scale
        self.weights = weights if weights is not None else PartitionWeights(0.0, 0.3, 0.4, 0.3)
        self.cushion_offset = 2.0 * math.sqrt(v_max) + margin

        self.cp = np.array(
            [
                path.center[0],
                path.center[1],
                path.radius,
                path.omega,
                path.initial_phase,
                region.center[0],
                region.center[1],
                region.radius,
                self.cushion_offset,
                intermediate_scale,
            ]
        )
        hd = -1 if path.heading_dim is None else int(path.heading_dim)
        self.idx = np.array([region.position_dims[0], region.position_dims[1], hd], dtype=np.int64)
        const_vals = np.zeros(n)
        for dim, value in path.fixed.items():
            if dim >= n:
                raise ConfigurationError(f"fixed path dim {dim} outside state of size {n}")
            const_vals[dim] = value
        self.const_vals = const_vals
        cum = self.weights.cumulative()
        self.plan = np.zeros(7)
        self.plan[_k.PL_DTA] = 1.0
        self.plan[_k.PL_DTU] = 1.0
        self.plan[_k.PL_CUM0] = self.weights.p0
        self.plan[_k.PL_CUM1] = cum[1]
        self.plan[_k.PL_CUM2] = cum[2]
        self.plan[_k.PL_CUM3] = cum[3]
        self.plan_kind = _k.PLAN_AVAILABLE

    def install_available(self, anchor: float, dt_available: float) -> None:
        """Anchor the available-phase blend (cushion point to boundary target)."""
        if dt_available <= 0:
            raise ConfigurationError(f"available duration must be > 0, got {dt_available}")
        self.plan[_k.PL_T0] = anchor
        self.plan[_k.PL_DTA] = dt_available
        self.plan_kind = _k.PLAN_AVAILABLE

    def install_denied(self, anchor: float, dt_denied: float) -> tuple[float, float, float]:
        """Anchor the denied-phase schedule; returns the partition instants."""
        if dt_denied <= 0:
            raise ConfigurationError(f"denied duration must be > 0, got {dt_denied}")
        cum = self.weights.cumulative()
        self.plan[_k.PL_T0] = anchor
        self.plan[_k.PL_DTU] = dt_denied
        self.plan[_k.PL_CUM0] = self.weights.p0
        self.plan[_k.PL_CUM1] = cum[1]
        self.plan[_k.PL_CUM2] = cum[2]
        self.plan[_k.PL_CUM3] = cum[3]
        self.plan_kind = _k.PLAN_DENIED
        return partition_times(anchor, dt_denied, self.weights)

    def eval(self, t: float, segment: int = _k.SEG_AUTO) -> tuple[np.ndarray, np.ndarray]:
        """Reference value and analytic derivative at time ``t``.

        ``segment`` forces a specific segment formula (clamped to its own
        parameter range), which lets tests compare adjoining formulas at a
        shared boundary instant.
        """
        out_x = np.empty(self.n)
        out_xd = np.empty(self.n)
        _k.eval_reference(
            float(t),
            self.cp,
            self.plan,
            self.plan_kind,
            self.idx,
            self.const_vals,
            segment,
            out_x,
            out_xd,
        )
        return out_x, out_xd

    def curve_points(self, t: float) -> dict:
        """Endpoint curves at ``t``: path point, boundary target, cushion point (full state)."""
        out = {}
        ang, gx, gy, gdx, gdy, bx, by, bdx, bdy, ex, ey, edx, edy = _k._curve(float(t), self.cp)
        for name, px, py in (("path", gx, gy), ("boundary", bx, by), ("cushion", ex, ey)):
            vec = self.const_vals.copy()
            vec[self.idx[0]] = px
            vec[self.idx[1]] = py
            if self.idx[2] >= 0:
                vec[self.idx[2]] = ang + self.path.tangent_offset()
            out[name] = vec
        return out

    def validate_path_outside(self, samples: int = 1024) -> float:
        """Minimum signed distance of the path over one period; must be positive."""
        if self.path.omega != 0.0:
            period = 2.0 * math.pi / abs(self.path.omega)
            ts = np.linspace(0.0, period, samples, endpoint=False)
        else:
            ts = np.array([0.0])
        min_sd = math.inf
        for t in ts:
            point, _ = self.path.evaluate(float(t), self.n, tuple(self.idx[:2]))
            min_sd = min(min_sd, signed_distance(self.region, point))
        if min_sd <= 0:
            raise ConfigurationError(
                f"desired path must lie strictly outside the feedback region "
                f"(min signed distance {min_sd:.6g} m)"
            )
        return min_sd
