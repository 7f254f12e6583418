"""Closed-loop engine: stepping, crossing detection, cycle planning, logging.

One run advances the plant/estimator pair with the tracking controller,
watching the true state for feedback-region crossings. Crossings are the
physical events: they switch the estimator between observer and predictor
and are detected on the true state, with the crossing instant refined by
bisection on the interpolated step. Reference-segment anchors, by contrast,
live on the step grid: the available-phase blend ends exactly where the
denied-phase schedule starts, so the reference stays continuous no matter
how detection jitters around the schedule.

Planning uses energies measured at the instants the conditions reference:
the stay duration comes from the detected entry, the absence duration from
the scheduled departure (the last instant feedback is guaranteed, and the
only causal choice when the outbound target sits strictly inside the
region). The run is marked failed, not silently patched, if the true state
has not re-entered when the planned absence elapses.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .errors import ConfigurationError, NumericFaultError
from .estimator import PHASE_AVAILABLE, PHASE_UNAVAILABLE, ROBUST_HIGHGAIN
from .geometry import FeedbackRegion, contains, signed_distance
from .plant import METHOD_RK4, sample_disturbances
from .scenario import MAX_DWELL_INTEGRATOR, Scenario
from .supervisor import Monitor, SwitchSignal, v_sigma
from .trajectory import CyclePlan, close_cycle, open_cycle, partition_times

CSV_FLOAT = repr  # shortest round-trip text; byte-stable across runs


@dataclass(frozen=True)
class CrossingEvent:
    t: float
    direction: str  # "out" | "in"
    theta: float  # fraction of the step at which the boundary was met


@dataclass(frozen=True)
class SwitchEvent:
    index: int
    kind: str  # "entry" | "exit"
    t: float
    v: float


@dataclass
class MonitorReport:
    violations: list
    n_checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class ReentryCheck:
    """Cushion guarantee data at a scheduled re-entry instant."""

    cycle: int
    t: float
    ref_signed_distance: float
    state_inside: bool


@dataclass
class SimLog:
    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    xbar: np.ndarray
    xbar_dot: np.ndarray
    v: np.ndarray
    phase: np.ndarray  # int8: 0 available, 1 unavailable
    v_sigma: np.ndarray
    e1_norm: np.ndarray
    e2_norm: np.ndarray
    e_norm: np.ndarray
    events: list
    cycles: list
    switch_signal: SwitchSignal
    monitor: MonitorReport
    reentry_checks: list
    seed: int
    scenario: Scenario
    clamp_count: int = 0
    graze_count: int = 0
    failed: str | None = None
    fault_step: int | None = None

    @property
    def z_norm(self) -> np.ndarray:
        return np.hypot(self.e1_norm, self.e2_norm)

    def phase_letters(self) -> np.ndarray:
        return np.where(self.phase == 0, "a", "u")


def detect_crossing(
    region: FeedbackRegion,
    state_prev: np.ndarray,
    state_next: np.ndarray,
    t_prev: float,
    dt: float,
    tol: float = 1e-9,
) -> CrossingEvent | None:
    """Refine a region-boundary crossing between two consecutive states.

    Returns None when both endpoints are on the same side (membership is
    closed: the boundary itself counts as inside). A chord that enters and
    leaves within one step is not an event; the engine flags suspicious
    chord depths separately.
    """
    sd_prev = signed_distance(region, state_prev)
    sd_next = signed_distance(region, state_next)
    inside_prev = sd_prev <= 0.0
    if inside_prev == (sd_next <= 0.0):
        return None
    prev = np.asarray(state_prev, dtype=float)
    nxt = np.asarray(state_next, dtype=float)
    lo, hi = 0.0, 1.0
    mid = 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        sd_mid = signed_distance(region, prev + mid * (nxt - prev))
        if abs(sd_mid) <= tol:
            break
        if (sd_mid <= 0.0) == inside_prev:
            lo = mid
        else:
            hi = mid
    direction = "out" if sd_next > 0.0 else "in"
    return CrossingEvent(t=t_prev + mid * dt, direction=direction, theta=mid)


def _steps_ceil(duration: float, dt: float) -> int:
    k = math.ceil(duration / dt - 1e-12)
    return max(k, 1)


def _steps_floor(duration: float, dt: float) -> int:
    return math.floor(duration / dt + 1e-12)


class _Run:
    """Mutable state for one engine run."""

    def __init__(self, scenario: Scenario, seed: int):
        sc = scenario
        self.sc = sc
        self.seed = seed
        self.dt = sc.integrator.dt
        self.n = sc.n
        self.n_steps = _steps_ceil(sc.duration, self.dt)
        self.method = 0 if sc.integrator.method == METHOD_RK4 else 1
        self.rates = sc.rates()
        self.traj = sc.build_trajectory()
        self.x = sc.x0.astype(float).copy()
        self.xhat = sc.xhat0.astype(float).copy()
        self.sigma = 0
        self.events: list[SwitchEvent] = []
        self.cycles: list[CyclePlan] = []
        self.signal = SwitchSignal()
        self.reentry_checks: list[ReentryCheck] = []
        self.last_exit: tuple[float, float, float] | None = None  # (t, V, ||e2||)
        self.pending_entry: CyclePlan | None = None
        self.t_part2_abs = math.inf
        self.failed: str | None = None
        self.fault_step: int | None = None
        self.graze_count = 0

        rows = self.n_steps + 1
        self.T = np.zeros(rows)
        self.X = np.zeros((rows, self.n))
        self.XH = np.zeros((rows, self.n))
        self.XB = np.zeros((rows, self.n))
        self.XBD = np.zeros((rows, self.n))
        self.VC = np.zeros((rows, self.n))
        self.PH = np.zeros(rows, dtype=np.int8)
        self.E1N = np.zeros(rows)
        self.E2N = np.zeros(rows)
        self.EN = np.zeros(rows)
        self.VS = np.zeros(rows)

        rng = np.random.Generator(np.random.Philox(seed))
        self.dist, self.clamp_count = sample_disturbances(sc.disturbance, rng, self.n_steps)

        gains = sc.estimator
        self.robust_kind = 0 if gains.robust_kind != ROBUST_HIGHGAIN else 1
        self.eps_hg = gains.epsilon if gains.epsilon is not None else 1.0
        self.d_bar = gains.d_bar

    # -- planning -----------------------------------------------------------

    def open_cycle(self, index: int, t_star: float, v_star: float) -> CyclePlan:
        """Start a cycle at a detected entry; the stay snaps up to the step grid."""
        return open_cycle(
            index,
            t_star,
            v_star,
            self.sc.budget,
            self.rates,
            self.sc.supervisor.alpha,
            intermediate_scale=self.sc.trajectory.intermediate_scale,
            grid_dt=self.dt,
        )

    def close_cycle(self, plan: CyclePlan, t_depart, v_exit, e2n_exit) -> CyclePlan:
        """Fix the absence at the scheduled departure; snaps down to the step grid.

        An unbounded absence (zero disturbance bound) is clipped to the
        remaining run length.
        """
        plan = close_cycle(
            plan,
            t_depart,
            v_exit,
            e2n_exit,
            self.sc.budget,
            self.rates,
            self.d_bar,
            self.sc.trajectory.weights,
            single_integrator_rule=self.sc.supervisor.max_dwell == MAX_DWELL_INTEGRATOR,
            grid_dt=self.dt,
        )
        if not math.isfinite(plan.dt_denied):
            plan.dt_denied = _steps_floor(self.n_steps * self.dt, self.dt) * self.dt
            plan.t_part1, plan.t_part2, plan.t_part3 = partition_times(
                t_depart, plan.dt_denied, self.sc.trajectory.weights
            )
        return plan

    # -- stepping -----------------------------------------------------------

    def run_span(self, k0: int, k1: int) -> tuple[int, int]:
        reason, k_end, graze = _k.run_span(
            self.x,
            self.xhat,
            k0,
            k1,
            self.dt,
            self.sigma,
            self.method,
            self.sc.plant.a_matrix,
            self.sc.controller.k1,
            self.sc.estimator.k2,
            self.d_bar,
            self.robust_kind,
            self.eps_hg,
            self.dist,
            self.traj.cp,
            self.traj.plan,
            self.traj.plan_kind,
            self.traj.idx,
            self.traj.const_vals,
            self.T,
            self.X,
            self.XH,
            self.XB,
            self.XBD,
            self.VC,
            self.PH,
            self.E1N,
            self.E2N,
            self.EN,
            self.VS,
        )
        self.graze_count += graze
        return reason, k_end

    def write_row(self, k: int) -> None:
        """Log the state at step k without advancing (mirrors the kernel's rows)."""
        t = k * self.dt
        xbar, xbard = self.traj.eval(t)
        e1 = self.xhat - xbar
        e2 = self.x - self.xhat
        vr = np.zeros(self.n)
        if self.sigma == 0:
            if self.robust_kind == 0:
                vr = self.sc.estimator.k2 @ e2 + self.d_bar * np.sign(e2)
            else:
                vr = self.sc.estimator.k2 @ e2 + (self.d_bar**2 / self.eps_hg) * e2
        v = xbard - self.sc.plant.a_matrix @ self.xhat - self.sc.controller.k1 @ e1 - vr
        self.T[k] = t
        self.X[k] = self.x
        self.XH[k] = self.xhat
        self.XB[k] = xbar
        self.XBD[k] = xbard
        self.VC[k] = v
        self.PH[k] = self.sigma
        self.E1N[k] = np.linalg.norm(e1)
        self.E2N[k] = np.linalg.norm(e2)
        self.EN[k] = np.linalg.norm(self.x - xbar)
        self.VS[k] = 0.5 * (self.E1N[k] ** 2 + self.E2N[k] ** 2)

    def interp_errors(self, k_prev: int, theta: float) -> tuple[np.ndarray, np.ndarray]:
        """Linearly interpolated e1, e2 between the rows bracketing a crossing."""
        xbar_next, _ = self.traj.eval((k_prev + 1) * self.dt)
        e1_prev = self.XH[k_prev] - self.XB[k_prev]
        e2_prev = self.X[k_prev] - self.XH[k_prev]
        e1_next = self.xhat - xbar_next
        e2_next = self.x - self.xhat
        e1 = (1.0 - theta) * e1_prev + theta * e1_next
        e2 = (1.0 - theta) * e2_prev + theta * e2_next
        return e1, e2


def run(scenario: Scenario, seed: int | None = None) -> SimLog:
    """Simulate the closed loop; deterministic for a given (scenario, seed).

    Per step: evaluate the reference, form the control, apply the
    robustifier while feedback is available, advance the estimate, apply
    the held disturbance, step the plant, then detect and refine any
    boundary crossing, updating the switch signal and the cycle plan at
    events. Envelope monitoring replays the guarantees over the finished
    log. A non-finite state aborts the run with the offending step
    recorded.
    """
    if seed is None:
        seed = scenario.seed
    st = _Run(scenario, seed)
    sc = scenario
    dt = st.dt

    if not contains(sc.region, st.x):
        raise ConfigurationError("the state must start inside the feedback region")

    # cycle 0 opens at t = 0
    st.traj.install_available(0.0, 1.0)  # placeholder span; replaced below
    xbar0, _ = st.traj.eval(0.0)
    v0 = v_sigma(st.xhat - xbar0, st.x - st.xhat)
    plan0 = st.open_cycle(0, 0.0, v0)
    st.traj.install_available(0.0, plan0.dt_available)
    st.cycles.append(plan0)
    st.events.append(SwitchEvent(0, "entry", 0.0, v0))
    st.reentry_checks.append(
        ReentryCheck(0, 0.0, signed_distance(sc.region, xbar0), contains(sc.region, st.x))
    )

    next_k = min(_steps_ceil(plan0.dt_available, dt), st.n_steps)
    next_action = "depart"
    k = 0
    truncate_at: int | None = None

    while k < st.n_steps:
        k_stop = min(next_k, st.n_steps)
        reason, k_end = st.run_span(k, k_stop)

        if reason == _k.REASON_FAULT:
            st.fault_step = k_end
            truncate_at = k_end  # rows 0..k_end-1 are valid
            break

        if reason == _k.REASON_CROSSING:
            k_prev = k_end - 1
            ev = detect_crossing(sc.region, st.X[k_prev], st.x, k_prev * dt, dt)
            if ev is None:  # pragma: no cover - kernel and refinement disagree
                raise NumericFaultError("crossing reported by the stepper but not refinable")
            e1s, e2s = st.interp_errors(k_prev, ev.theta)
            v_star = v_sigma(e1s, e2s)
            if ev.direction == "out":
                idx = st.signal.record_exit(ev.t)
                st.events.append(SwitchEvent(idx, "exit", ev.t, v_star))
                st.last_exit = (ev.t, v_star, float(np.linalg.norm(e2s)))
                st.sigma = 1
            else:
                idx = st.signal.record_entry(ev.t)
                st.events.append(SwitchEvent(idx, "entry", ev.t, v_star))
                st.sigma = 0
                in_inbound_window = (
                    st.traj.plan_kind == _k.PLAN_DENIED and ev.t >= st.t_part2_abs
                )
                if in_inbound_window and st.pending_entry is None:
                    st.pending_entry = st.open_cycle(len(st.cycles), ev.t, v_star)
                if sc.reset_on_entry:
                    st.xhat[:] = st.x
            k = k_end
            continue

        # clean stop
        k = k_end
        if k >= st.n_steps:
            break

        if next_action == "depart":
            t_u = k * dt
            if st.sigma == 0:
                xbar_u, _ = st.traj.eval(t_u)
                e1_u = st.xhat - xbar_u
                e2_u = st.x - st.xhat
                v_exit = v_sigma(e1_u, e2_u)
                e2n_exit = float(np.linalg.norm(e2_u))
            else:
                # state slipped out just before the schedule; use the energy
                # measured at that detected exit (the last available instant)
                _, v_exit, e2n_exit = st.last_exit
            if v_exit > sc.budget.v_max:
                st.failed = (
                    f"energy at departure ({v_exit:.6g}) exceeds the bound "
                    f"({sc.budget.v_max:.6g})"
                )
                break
            cyc = st.close_cycle(st.cycles[-1], t_u, v_exit, e2n_exit)
            if cyc.dt_denied < dt:
                st.failed = f"planned absence {cyc.dt_denied:.6g} s is below one step"
                break
            st.traj.install_denied(t_u, cyc.dt_denied)
            st.t_part2_abs = cyc.t_part2
            cyc.boundary_target = st.traj.curve_points(t_u)["boundary"]
            cyc.cushion_point = st.traj.curve_points(cyc.t_part3)["cushion"]
            next_k = k + _steps_floor(cyc.dt_denied, dt)
            next_action = "arrive"
        else:  # arrive
            if st.pending_entry is None:
                st.failed = "state did not re-enter the feedback region within the planned absence"
                break
            t_a = k * dt
            plan = st.pending_entry
            st.pending_entry = None
            st.traj.install_available(t_a, plan.dt_available)
            st.cycles.append(plan)
            xbar_a, _ = st.traj.eval(t_a)
            st.reentry_checks.append(
                ReentryCheck(
                    plan.index,
                    t_a,
                    signed_distance(sc.region, xbar_a),
                    contains(sc.region, st.x),
                )
            )
            st.t_part2_abs = math.inf
            next_k = k + _steps_ceil(plan.dt_available, dt)
            next_action = "depart"

    if st.fault_step is None:
        st.write_row(k)
        rows = k + 1
    else:
        rows = truncate_at

    monitor = Monitor(
        sc.budget,
        st.rates,
        st.d_bar,
        slack_rel=sc.supervisor.monitor_slack,
    )
    report = _monitor_pass(monitor, st, rows)

    log = SimLog(
        t=st.T[:rows],
        x=st.X[:rows],
        xhat=st.XH[:rows],
        xbar=st.XB[:rows],
        xbar_dot=st.XBD[:rows],
        v=st.VC[:rows],
        phase=st.PH[:rows],
        v_sigma=st.VS[:rows],
        e1_norm=st.E1N[:rows],
        e2_norm=st.E2N[:rows],
        e_norm=st.EN[:rows],
        events=st.events,
        cycles=st.cycles,
        switch_signal=st.signal,
        monitor=report,
        reentry_checks=st.reentry_checks,
        seed=seed,
        scenario=scenario,
        clamp_count=st.clamp_count,
        graze_count=st.graze_count,
        failed=st.failed,
        fault_step=st.fault_step,
    )
    return log


def _monitor_pass(monitor: Monitor, st: _Run, rows: int) -> MonitorReport:
    """Replay the envelope guarantees over the finished log, re-anchoring at events."""
    T = st.T[:rows]
    VS = st.VS[:rows]
    first = st.events[0]
    monitor.start(first.t, first.v)
    lo = 0
    phase = PHASE_AVAILABLE
    for ev in st.events[1:]:
        hi = int(np.searchsorted(T, ev.t, side="left"))
        hi = min(hi, rows)
        monitor.check_interval(T[lo:hi], VS[lo:hi], phase)
        phase = PHASE_UNAVAILABLE if ev.kind == "exit" else PHASE_AVAILABLE
        monitor.on_switch(ev.t, ev.v, phase)
        lo = hi
    monitor.check_interval(T[lo:rows], VS[lo:rows], phase)
    return MonitorReport(violations=monitor.violations, n_checked=monitor.n_checked)


# -- metrics ----------------------------------------------------------------


@dataclass
class Metrics:
    """Per-cycle dwell table and run-level aggregates."""

    cycles: list  # rows: dict(cycle, dt_available, dt_denied, part1, part2, part3)
    avg_max_dwell: float | None
    avg_min_dwell: float | None
    dwell_ratio: float | None
    pct_time_on_path: float | None
    n_complete_cycles: int
    empty: bool = False

    def to_dict(self) -> dict:
        return {
            "cycles": self.cycles,
            "avg_max_dwell": self.avg_max_dwell,
            "avg_min_dwell": self.avg_min_dwell,
            "dwell_ratio": self.dwell_ratio,
            "pct_time_on_path": self.pct_time_on_path,
            "n_complete_cycles": self.n_complete_cycles,
            "empty": self.empty,
        }


def compute_metrics(cycles: list, total_duration: float) -> Metrics:
    """Dwell and partition tables from the planned cycle records.

    Planned durations are the quantities the dwell conditions constrain;
    realized crossing-to-crossing intervals sit strictly inside them.
    """
    if not cycles:
        return Metrics([], None, None, None, None, 0, empty=True)
    rows = []
    for c in cycles:
        row = {"cycle": c.index, "dt_available": c.dt_available}
        if c.complete:
            row["dt_denied"] = c.dt_denied
            row["part1"] = c.t_part1 - c.t_depart
            row["part2"] = c.t_part2 - c.t_part1
            row["part3"] = c.t_part3 - c.t_part2
        else:
            row["dt_denied"] = None
            row["part1"] = row["part2"] = row["part3"] = None
        rows.append(row)
    mins = [c.dt_available for c in cycles]
    maxs = [c.dt_denied for c in cycles if c.complete]
    avg_min = float(np.mean(mins)) if mins else None
    avg_max = float(np.mean(maxs)) if maxs else None
    ratio = (avg_max / avg_min) if (avg_max is not None and avg_min) else None
    on_path = sum(r["part2"] for r in rows if r["part2"] is not None)
    pct = 100.0 * on_path / total_duration if total_duration > 0 else None
    return Metrics(rows, avg_max, avg_min, ratio, pct, len(maxs))


def log_metrics(log: SimLog) -> Metrics:
    total = float(log.t[-1] - log.t[0]) if log.t.size > 1 else 0.0
    return compute_metrics(log.cycles, total)


# -- file output ------------------------------------------------------------


def csv_header(n: int) -> str:
    cols = ["t"]
    cols += [f"x{i + 1}" for i in range(n)]
    cols += [f"xhat{i + 1}" for i in range(n)]
    cols += [f"xbar{i + 1}" for i in range(n)]
    cols += ["phase", "v_sigma", "z_norm", "e_norm", "e1_norm", "e2_norm"]
    return ",".join(cols)


def write_sim_csv(log: SimLog, path, decimate: int = 1) -> None:
    z = log.z_norm
    letters = log.phase_letters()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_header(log.x.shape[1]) + "\n")
        for k in range(0, log.t.shape[0], max(1, decimate)):
            parts = [CSV_FLOAT(float(log.t[k]))]
            parts += [CSV_FLOAT(float(v)) for v in log.x[k]]
            parts += [CSV_FLOAT(float(v)) for v in log.xhat[k]]
            parts += [CSV_FLOAT(float(v)) for v in log.xbar[k]]
            parts.append(str(letters[k]))
            parts += [
                CSV_FLOAT(float(log.v_sigma[k])),
                CSV_FLOAT(float(z[k])),
                CSV_FLOAT(float(log.e_norm[k])),
                CSV_FLOAT(float(log.e1_norm[k])),
                CSV_FLOAT(float(log.e2_norm[k])),
            ]
            fh.write(",".join(parts) + "\n")


def write_events_csv(log: SimLog, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,kind,t,V\n")
        for ev in log.events:
            fh.write(f"{ev.index},{ev.kind},{CSV_FLOAT(float(ev.t))},{CSV_FLOAT(float(ev.v))}\n")


def write_cycles_csv(log: SimLog, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,t_entry,v_entry,dt_available,t_depart,v_depart,dt_denied,t_part1,t_part2,t_part3\n")
        for c in log.cycles:
            cells = [str(c.index)] + [
                CSV_FLOAT(float(v)) for v in (c.t_entry, c.v_entry, c.dt_available)
            ]
            if c.complete:
                cells += [
                    CSV_FLOAT(float(v))
                    for v in (c.t_depart, c.v_depart, c.dt_denied, c.t_part1, c.t_part2, c.t_part3)
                ]
            else:
                cells += [""] * 6
            fh.write(",".join(cells) + "\n")
