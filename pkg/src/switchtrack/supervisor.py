"""Switched-systems supervision: Lyapunov bookkeeping and dwell-time conditions.

The common Lyapunov-like energy ``V = 0.5*||e1||**2 + 0.5*||e2||**2`` decays
at rate ``lambda_s = 2*min(k1_min, k2_min - c)`` while feedback is available
and obeys ``Vdot <= lambda_u*V + 0.5*d_bar**2`` with ``lambda_u = 2*c + 1``
while it is denied (``c`` is the drift Lipschitz constant). From the budget
``V_T < V_M`` the supervisor derives, at each measured transition:

* minimum stay with feedback:   ``max(alpha, ln(V_entry / V_T) / lambda_s)``
  (zero formula term once ``V_entry <= V_T``; ``alpha`` keeps blend-segment
  durations bounded away from zero),
* maximum stay without feedback (general drift):
  ``ln((V_M + q) / (V_exit + q)) / lambda_u`` with ``q = d_bar**2 / (2*lambda_u)``,
* maximum stay without feedback (single integrator): positive root of
  ``0.5*d_bar**2*tau**2 + d_bar*||e2_exit||*tau + V_exit = V_M``.

A runtime monitor replays the guarantees against the simulated energy.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerGains
from .errors import ConfigurationError, InfeasibleScenarioError
from .estimator import PHASE_AVAILABLE, PHASE_UNAVAILABLE, EstimatorGains


@dataclass(frozen=True)
class LyapunovBudget:
    """Energy bound ``v_max`` and exit threshold ``v_threshold``.

    Both derive from the tracking-error budget through ``V = (z/2)**2``
    (the conservative ``||z|| <= 2*sqrt(V)`` convention).
    """

    v_max: float
    v_threshold: float
    z_max: float
    z_threshold: float

    def __post_init__(self):
        if not (self.v_max > self.v_threshold > 0):
            raise ConfigurationError(
                f"budget must satisfy v_max > v_threshold > 0, got "
                f"({self.v_max}, {self.v_threshold})"
            )
        for v, z, name in (
            (self.v_max, self.z_max, "z_max"),
            (self.v_threshold, self.z_threshold, "z_threshold"),
        ):
            if abs(v - (z / 2.0) ** 2) > 1e-12 * max(1.0, v):
                raise ConfigurationError(f"v bound inconsistent with {name}: {v} vs ({z}/2)**2")

    @classmethod
    def from_z(cls, z_max: float, z_threshold: float) -> "LyapunovBudget":
        if not (z_max > z_threshold > 0):
            raise ConfigurationError(
                f"need z_max > z_threshold > 0, got ({z_max}, {z_threshold})"
            )
        return cls((z_max / 2.0) ** 2, (z_threshold / 2.0) ** 2, z_max, z_threshold)

    def epsilon_compatible(self, epsilon: float) -> bool:
        """Whether the high-gain design guidance ``v_threshold >= epsilon`` holds."""
        return self.v_threshold >= epsilon


@dataclass(frozen=True)
class Rates:
    lambda_s: float
    lambda_u: float
    c: float
    k1_min: float
    k2_min: float


def compute_rates(
    k1: ControllerGains | np.ndarray, k2: EstimatorGains | np.ndarray, c: float
) -> Rates:
    """Decay/growth rates from the gain floors and the drift Lipschitz constant."""
    k1_min = k1.k1_min if isinstance(k1, ControllerGains) else float(np.linalg.eigvalsh(np.asarray(k1, float))[0])
    k2_min = k2.k2_min if isinstance(k2, EstimatorGains) else float(np.linalg.eigvalsh(np.asarray(k2, float))[0])
    if c < 0:
        raise ConfigurationError(f"Lipschitz constant must be >= 0, got {c}")
    if k2_min <= c:
        raise InfeasibleScenarioError(
            f"observer gain floor {k2_min} must exceed the drift Lipschitz constant {c}; "
            f"the estimation error cannot be made to decay otherwise"
        )
    lambda_s = 2.0 * min(k1_min, k2_min - c)
    if lambda_s <= 0:
        raise InfeasibleScenarioError(f"decay rate must be positive, got {lambda_s}")
    return Rates(lambda_s, 2.0 * c + 1.0, c, k1_min, k2_min)


def v_sigma(e1: np.ndarray, e2: np.ndarray) -> float:
    """Common Lyapunov-like energy ``0.5*||e1||**2 + 0.5*||e2||**2``."""
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    return 0.5 * float(e1 @ e1) + 0.5 * float(e2 @ e2)


def min_dwell(v_entry: float, budget: LyapunovBudget, rates: Rates, alpha: float = 0.0) -> float:
    """Minimum time to keep feedback, from the energy measured at entry."""
    if not math.isfinite(v_entry) or v_entry < 0:
        raise ConfigurationError(f"v_entry must be finite and >= 0, got {v_entry}")
    if alpha < 0:
        raise ConfigurationError(f"alpha must be >= 0, got {alpha}")
    if v_entry <= budget.v_threshold:
        return alpha
    return max(alpha, math.log(v_entry / budget.v_threshold) / rates.lambda_s)


def max_dwell(v_exit: float, budget: LyapunovBudget, rates: Rates, d_bar: float) -> float:
    """Maximum time without feedback (general drift), from the energy at exit."""
    if not math.isfinite(v_exit) or v_exit < 0:
        raise ConfigurationError(f"v_exit must be finite and >= 0, got {v_exit}")
    if v_exit > budget.v_max:
        raise InfeasibleScenarioError(
            f"energy at exit ({v_exit}) already exceeds the bound ({budget.v_max}); "
            f"the planner must not have allowed the exit"
        )
    q = d_bar**2 / (2.0 * rates.lambda_u)
    return math.log((budget.v_max + q) / (v_exit + q)) / rates.lambda_u


def max_dwell_single_integrator(
    v_exit: float, e2_exit_norm: float, v_max: float, d_bar: float
) -> float:
    """Maximum time without feedback for single-integrator drift.

    Tighter than the general bound because the estimation error grows at
    most linearly there. Returns ``inf`` when the disturbance bound is zero.
    """
    if v_exit < 0 or e2_exit_norm < 0:
        raise ConfigurationError("v_exit and e2_exit_norm must be >= 0")
    if v_exit > v_max:
        raise InfeasibleScenarioError(f"energy at exit ({v_exit}) exceeds the bound ({v_max})")
    if 0.5 * e2_exit_norm**2 > v_exit * (1.0 + 1e-12) + 1e-300:
        raise ConfigurationError(
            f"0.5*||e2||**2 = {0.5 * e2_exit_norm**2} cannot exceed v_exit = {v_exit}"
        )
    if d_bar == 0.0:
        return math.inf
    return (
        math.sqrt(e2_exit_norm**2 - 2.0 * (v_exit - v_max)) - e2_exit_norm
    ) / d_bar


@dataclass
class SwitchSignal:
    """Piecewise-constant record of feedback availability.

    Transitions alternate strictly: an exit may only follow an entry and
    vice versa, at strictly increasing times. Phase ``"a"`` is active at
    ``t = 0``.
    """

    phase: str = PHASE_AVAILABLE
    entry_times: list = field(default_factory=lambda: [0.0])
    exit_times: list = field(default_factory=list)

    def _last_time(self) -> float:
        latest = -math.inf
        if self.entry_times:
            latest = max(latest, self.entry_times[-1])
        if self.exit_times:
            latest = max(latest, self.exit_times[-1])
        return latest

    def record_exit(self, t: float) -> int:
        if self.phase != PHASE_AVAILABLE:
            raise ConfigurationError("exit recorded while feedback already unavailable")
        if t <= self._last_time():
            raise ConfigurationError(f"transition times must strictly increase ({t})")
        self.exit_times.append(float(t))
        self.phase = PHASE_UNAVAILABLE
        return len(self.exit_times) - 1

    def record_entry(self, t: float) -> int:
        if self.phase != PHASE_UNAVAILABLE:
            raise ConfigurationError("entry recorded while feedback already available")
        if t <= self._last_time():
            raise ConfigurationError(f"transition times must strictly increase ({t})")
        self.entry_times.append(float(t))
        self.phase = PHASE_AVAILABLE
        return len(self.entry_times) - 1

    @property
    def cycle_index(self) -> int:
        return len(self.exit_times)


@dataclass(frozen=True)
class MonitorViolation:
    kind: str
    t: float
    value: float
    bound: float


class Monitor:
    """Runtime verification of the stability guarantees.

    Per step it asserts, with relative slack for discrete integration of a
    discontinuous loop:

    * ``bound``:    ``V <= v_max`` once the first exit has occurred (before
      that the initial transient may start above the bound and is covered
      by the decay envelope),
    * ``decay``:    in phase a, ``V <= max(V_anchor * exp(-lambda_s*tau), v_threshold)``
      measured from the last entry (the guarantee only drives the energy
      down to the threshold; a high-gain robustifier settles at a floor
      below it, a sliding-mode one at its chattering band),
    * ``growth``:   in phase u, ``V <= (V_anchor + q) * exp(lambda_u*tau) - q``
      measured from the last exit,
    * ``exit``:     ``V <= v_threshold`` at every exit instant.

    Violations are recorded, never raised; they fail acceptance, not the run.
    """

    def __init__(
        self,
        budget: LyapunovBudget,
        rates: Rates,
        d_bar: float,
        slack_rel: float = 0.05,
        slack_abs: float = 1e-9,
    ):
        self.budget = budget
        self.rates = rates
        self.d_bar = d_bar
        self.slack_rel = slack_rel
        self.slack_abs = slack_abs
        self.violations: list[MonitorViolation] = []
        self.n_checked = 0
        self._phase = PHASE_AVAILABLE
        self._anchor_t = 0.0
        self._anchor_v = 0.0
        self._seen_exit = False

    def start(self, t0: float, v0: float) -> None:
        self._phase = PHASE_AVAILABLE
        self._anchor_t = t0
        self._anchor_v = v0

    def on_switch(self, t: float, v_at_switch: float, new_phase: str) -> None:
        """Re-anchor the envelopes at a detected transition; check the exit threshold."""
        if new_phase == PHASE_UNAVAILABLE:
            self._seen_exit = True
            bound = self._slacked(self.budget.v_threshold)
            if v_at_switch > bound:
                self.violations.append(MonitorViolation("exit", t, v_at_switch, bound))
        self._phase = new_phase
        self._anchor_t = t
        self._anchor_v = v_at_switch

    def _slacked(self, bound: float) -> float:
        return bound * (1.0 + self.slack_rel) + self.slack_abs

    def envelope(self, tau: float, phase: str, v_anchor: float) -> float:
        """Guaranteed energy bound ``tau`` seconds after an anchor in the given phase."""
        if phase == PHASE_AVAILABLE:
            return max(v_anchor * math.exp(-self.rates.lambda_s * tau), self.budget.v_threshold)
        q = self.d_bar**2 / (2.0 * self.rates.lambda_u)
        return (v_anchor + q) * math.exp(self.rates.lambda_u * tau) - q

    def step(self, t: float, e1: np.ndarray, e2: np.ndarray, phase: str) -> bool:
        """Check one step; returns False if any bound was breached (and records it)."""
        v = v_sigma(e1, e2)
        self.n_checked += 1
        ok = True
        if self._seen_exit:
            bound = self._slacked(self.budget.v_max)
            if v > bound:
                self.violations.append(MonitorViolation("bound", t, v, bound))
                ok = False
        env = self._slacked(self.envelope(t - self._anchor_t, phase, self._anchor_v))
        if v > env:
            kind = "decay" if phase == PHASE_AVAILABLE else "growth"
            self.violations.append(MonitorViolation(kind, t, v, env))
            ok = False
        return ok

    def check_interval(self, ts: np.ndarray, vs: np.ndarray, phase: str) -> None:
        """Vectorized equivalent of calling :meth:`step` on every logged row."""
        if ts.size == 0:
            return
        self.n_checked += int(ts.size)
        tau = ts - self._anchor_t
        if phase == PHASE_AVAILABLE:
            env = np.maximum(
                self._anchor_v * np.exp(-self.rates.lambda_s * tau), self.budget.v_threshold
            )
        else:
            q = self.d_bar**2 / (2.0 * self.rates.lambda_u)
            env = (self._anchor_v + q) * np.exp(self.rates.lambda_u * tau) - q
        env = env * (1.0 + self.slack_rel) + self.slack_abs
        bad = vs > env
        kind = "decay" if phase == PHASE_AVAILABLE else "growth"
        for idx in np.flatnonzero(bad):
            self.violations.append(MonitorViolation(kind, float(ts[idx]), float(vs[idx]), float(env[idx])))
        if self._seen_exit:
            vbound = self._slacked(self.budget.v_max)
            for idx in np.flatnonzero(vs > vbound):
                self.violations.append(MonitorViolation("bound", float(ts[idx]), float(vs[idx]), vbound))
