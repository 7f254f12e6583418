import math

import numpy as np
import pytest

import switchtrack as st
import switchtrack._kernels as _k
import switchtrack.engine as engine_mod
from switchtrack._accel import USING_NUMBA
from switchtrack.engine import compute_metrics, detect_crossing, log_metrics, run
from switchtrack.geometry import FeedbackRegion, contains
from switchtrack.supervisor import max_dwell, max_dwell_single_integrator, min_dwell
from switchtrack.trajectory import CyclePlan

UNIT = FeedbackRegion(center=[0.0, 0.0], radius=1.0)


def short_scenario(duration=4.0, seed=0, **extra):
    raw = st.PRESETS["sim-circle"]()
    raw["duration"] = duration
    raw["seed"] = seed
    for key, value in extra.items():
        if isinstance(value, dict):
            raw[key] = {**raw[key], **value}
        else:
            raw[key] = value
    return st.from_dict(raw)


# -- crossing detection --------------------------------------------------------


def test_detect_crossing_analytic_root():
    # radial motion at 1 m/s: boundary met 0.4 ms into the step
    prev = np.array([0.9996, 0.0])
    nxt = np.array([1.0006, 0.0])
    ev = detect_crossing(UNIT, prev, nxt, t_prev=2.0, dt=1e-3)
    assert ev is not None and ev.direction == "out"
    assert ev.t == pytest.approx(2.0 + 0.4e-3, abs=1e-9)
    ev = detect_crossing(UNIT, nxt, prev, t_prev=2.0, dt=1e-3)
    assert ev.direction == "in"
    assert ev.t == pytest.approx(2.0 + 0.6e-3, abs=1e-9)


def test_detect_crossing_none_cases():
    assert detect_crossing(UNIT, np.array([0.1, 0.0]), np.array([0.2, 0.0]), 0.0, 1e-3) is None
    assert detect_crossing(UNIT, np.array([1.5, 0.0]), np.array([1.6, 0.0]), 0.0, 1e-3) is None
    # landing exactly on the boundary counts as inside (closed region)
    assert detect_crossing(UNIT, np.array([0.5, 0.0]), np.array([1.0, 0.0]), 0.0, 1e-3) is None


def test_detect_crossing_refinement_tolerance():
    rng = np.random.default_rng(5)
    for _ in range(50):
        ang = rng.uniform(0, 2 * math.pi)
        inner = np.array([0.98 * math.cos(ang), 0.98 * math.sin(ang)])
        outer = np.array([1.03 * math.cos(ang + 0.01), 1.03 * math.sin(ang + 0.01)])
        ev = detect_crossing(UNIT, inner, outer, 0.0, 1e-3)
        point = inner + ev.theta * (outer - inner)
        assert abs(np.linalg.norm(point) - 1.0) <= 1e-9


# -- equilibrium and determinism -------------------------------------------------


def test_equilibrium_errors_stay_at_zero(warm_kernels):
    """Exact model, no disturbance, state on the reference: errors stay below 1e-9."""
    raw = st.PRESETS["sim-circle"]()
    sc0 = st.from_dict(raw)
    traj = sc0.build_trajectory()
    start = traj.curve_points(0.0)["cushion"]
    raw.update(
        {
            "duration": 10.0,
            "disturbance": {"kind": "none"},
            "x0": [float(v) for v in start],
            "xhat0": [float(v) for v in start],
        }
    )
    log = run(st.from_dict(raw))
    assert log.failed is None and log.fault_step is None
    assert log.e1_norm.max() <= 1e-9
    assert log.e2_norm.max() <= 1e-9
    assert log.e_norm.max() <= 1e-9


def test_run_is_deterministic(warm_kernels):
    sc = short_scenario(duration=5.0, seed=3)
    a = run(sc)
    b = run(sc)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.xhat, b.xhat)
    np.testing.assert_array_equal(a.v_sigma, b.v_sigma)
    assert [e.t for e in a.events] == [e.t for e in b.events]


def test_phase_column_agrees_with_switch_signal(sim_circle_logs):
    log = sim_circle_logs[0]
    expected = np.zeros(log.t.shape[0], dtype=np.int8)
    for ev in log.events:
        if ev.t == 0.0:
            continue
        k = int(np.searchsorted(log.t, ev.t, side="left"))
        expected[k:] = 1 if ev.kind == "exit" else 0
    np.testing.assert_array_equal(log.phase, expected)
    # and the switch signal holds the same transitions
    assert len(log.switch_signal.exit_times) == sum(1 for e in log.events if e.kind == "exit")


# -- dwell bookkeeping -----------------------------------------------------------


def _first_exit_after(events, t):
    for ev in events:
        if ev.kind == "exit" and ev.t >= t:
            return ev
    return None


def test_planner_never_schedules_below_minimum_dwell(sim_circle_logs):
    sc = sim_circle_logs[0].scenario
    rates = sc.rates()
    for log in sim_circle_logs.values():
        for cyc in log.cycles:
            needed = min_dwell(cyc.v_entry, sc.budget, rates, sc.supervisor.alpha)
            assert cyc.dt_available >= needed - 1e-12


def test_realized_absence_is_within_the_planned_bound(sim_circle_logs):
    sc = sim_circle_logs[0].scenario
    rates = sc.rates()
    for log in sim_circle_logs.values():
        cycles = log.cycles
        for cyc, nxt in zip(cycles, cycles[1:]):
            first_exit = _first_exit_after(log.events, cyc.t_entry)
            assert first_exit is not None
            realized = nxt.t_entry - first_exit.t
            bound = max_dwell(first_exit.v, sc.budget, rates, sc.disturbance.d_bar)
            assert realized <= bound + 1e-9
            assert realized <= cyc.dt_denied + 1e-9


def test_exit_energy_below_threshold_on_preset(sim_circle_logs):
    for log in sim_circle_logs.values():
        for ev in log.events:
            if ev.kind == "exit":
                assert ev.v <= log.scenario.budget.v_threshold * 1.05 + 1e-9


def test_cycle_records_match_partition_weights(quad_log):
    w = quad_log.scenario.trajectory.weights
    for cyc in quad_log.cycles:
        if not cyc.complete:
            continue
        assert cyc.t_part1 - cyc.t_depart == pytest.approx(w.p1 * cyc.dt_denied, abs=1e-9)
        assert cyc.t_part2 - cyc.t_part1 == pytest.approx(w.p2 * cyc.dt_denied, abs=1e-9)
        assert cyc.t_part3 - cyc.t_part2 == pytest.approx(w.p3 * cyc.dt_denied, abs=1e-9)
        assert cyc.t_part3 == pytest.approx(cyc.t_depart + cyc.dt_denied, abs=1e-9)


def test_quad_uses_integrator_dwell_rule(quad_log):
    sc = quad_log.scenario
    dt = sc.integrator.dt
    for cyc in quad_log.cycles:
        if not cyc.complete:
            continue
        raw = max_dwell_single_integrator(
            cyc.v_depart, cyc.e2_depart_norm, sc.budget.v_max, sc.disturbance.d_bar
        )
        # planned absence is the integrator-specific bound, floored to the grid
        assert cyc.dt_denied == pytest.approx(math.floor(raw / dt + 1e-12) * dt, abs=1e-12)


# -- metrics ----------------------------------------------------------------------


def test_metrics_synthetic_example():
    cycles = [
        CyclePlan(0, 0.0, 0.1, 1.0, 1.0, t_depart=1.0, v_depart=1e-4, dt_denied=2.0,
                  t_part1=1.6, t_part2=2.4, t_part3=3.0),
        CyclePlan(1, 3.0, 0.1, 1.0, 1.0, t_depart=4.0, v_depart=1e-4, dt_denied=4.0,
                  t_part1=5.2, t_part2=6.8, t_part3=8.0),
    ]
    metrics = compute_metrics(cycles, total_duration=8.0)
    assert metrics.avg_max_dwell == pytest.approx(3.0)
    assert metrics.avg_min_dwell == pytest.approx(1.0)
    assert metrics.dwell_ratio == pytest.approx(3.0)
    assert metrics.n_complete_cycles == 2


def test_metrics_single_cycle_equals_that_cycle():
    cycles = [
        CyclePlan(0, 0.0, 0.1, 0.5, 1.0, t_depart=0.5, v_depart=1e-4, dt_denied=2.5,
                  t_part1=1.25, t_part2=2.25, t_part3=3.0),
    ]
    metrics = compute_metrics(cycles, total_duration=3.0)
    assert metrics.avg_max_dwell == pytest.approx(2.5)
    assert metrics.avg_min_dwell == pytest.approx(0.5)


def test_metrics_empty_marker():
    metrics = compute_metrics([], total_duration=1.0)
    assert metrics.empty
    assert metrics.n_complete_cycles == 0


# -- estimator access discipline ---------------------------------------------------


def test_control_path_ignores_true_state_while_denied(monkeypatch, warm_kernels):
    """Perturbing the plant disturbance inside a denied window must not
    change the estimate or the control over that window."""
    sc = short_scenario(duration=8.0, seed=2)
    base = run(sc)
    cyc = base.cycles[1]
    assert cyc.complete
    dt = sc.integrator.dt
    k_lo = int(round(cyc.t_part1 / dt)) + 10
    k_hi = int(round(cyc.t_part2 / dt)) - 10
    assert k_hi > k_lo + 50

    from switchtrack.plant import sample_disturbances as real_sampler

    def tampered(model, rng, count):
        samples, clamped = real_sampler(model, rng, count)
        samples = samples.copy()
        samples[k_lo:k_hi] *= -1.0  # symmetric box: still a valid realization
        return samples, clamped

    monkeypatch.setattr(engine_mod, "sample_disturbances", tampered)
    other = run(sc)

    assert not np.array_equal(base.x[k_lo + 1 : k_hi], other.x[k_lo + 1 : k_hi])
    np.testing.assert_array_equal(base.xhat[k_lo:k_hi], other.xhat[k_lo:k_hi])
    np.testing.assert_array_equal(base.v[k_lo:k_hi], other.v[k_lo:k_hi])
    np.testing.assert_array_equal(base.xbar[k_lo:k_hi], other.xbar[k_lo:k_hi])


def test_reset_on_entry_zeroes_estimation_error(warm_kernels):
    sc = short_scenario(duration=8.0, seed=1, estimator={"reset_on_entry": True})
    log = run(sc)
    entries = [ev.t for ev in log.events if ev.kind == "entry" and ev.t > 0.0]
    assert entries
    for t_star in entries:
        k = int(np.searchsorted(log.t, t_star, side="left"))
        assert log.e2_norm[k] == 0.0


# -- faults and failure marking -----------------------------------------------------


def test_numeric_fault_aborts_with_step_recorded(monkeypatch, warm_kernels):
    sc = short_scenario(duration=4.0, seed=0)
    from switchtrack.plant import sample_disturbances as real_sampler

    def poisoned(model, rng, count):
        samples, clamped = real_sampler(model, rng, count)
        samples = samples.copy()
        samples[500] = np.nan
        return samples, clamped

    monkeypatch.setattr(engine_mod, "sample_disturbances", poisoned)
    log = run(sc)
    assert log.fault_step == 501
    assert log.t.shape[0] == 501  # truncated at the last finite row
    assert np.all(np.isfinite(log.x))


def test_failed_marker_when_reentry_impossible(monkeypatch, warm_kernels):
    """An above-bound disturbance that pins the state outside marks the run failed."""
    sc = short_scenario(duration=8.0, seed=2)
    base = run(sc)
    cyc = base.cycles[1]
    k_lo = int(round(cyc.t_part2 / sc.integrator.dt))

    from switchtrack.plant import sample_disturbances as real_sampler

    def hurricane(model, rng, count):
        samples, clamped = real_sampler(model, rng, count)
        samples = samples.copy()
        samples[k_lo:, :2] = 5.0  # breaks the model's norm bound on purpose
        return samples, clamped

    monkeypatch.setattr(engine_mod, "sample_disturbances", hurricane)
    log = run(sc)
    assert log.failed is not None
    assert "re-enter" in log.failed
    assert any(v.kind in ("bound", "growth") for v in log.monitor.violations)


def test_euler_method_runs(warm_kernels):
    sc = short_scenario(duration=1.0, seed=0, integrator={"dt": 1e-3, "method": "euler"})
    log = run(sc)
    assert log.fault_step is None
    expected = log.e1_norm[0] * np.exp(-3.0 * log.t)
    rel = np.abs(log.e1_norm - expected) / np.maximum(expected, 1e-12)
    assert rel.max() < 5e-2  # first-order method: loose agreement only


# -- kernel equivalence ---------------------------------------------------------------


@pytest.mark.skipif(not USING_NUMBA, reason="compiled path not active")
def test_run_span_matches_python_fallback(warm_kernels):
    """One stepping span produces the same rows compiled and interpreted."""
    sc = short_scenario(duration=0.5, seed=4)

    def span_args(state):
        return (
            state.x, state.xhat, 0, 400, state.dt, 0, 0,
            sc.plant.a_matrix, sc.controller.k1, sc.estimator.k2,
            state.d_bar, state.robust_kind, state.eps_hg, state.dist,
            state.traj.cp, state.traj.plan, state.traj.plan_kind,
            state.traj.idx, state.traj.const_vals,
            state.T, state.X, state.XH, state.XB, state.XBD, state.VC,
            state.PH, state.E1N, state.E2N, state.EN, state.VS,
        )

    stt = engine_mod._Run(sc, seed=4)
    stt.traj.install_available(0.0, 0.5)
    out_jit = _k.run_span(*span_args(stt))
    stp = engine_mod._Run(sc, seed=4)
    stp.traj.install_available(0.0, 0.5)
    out_py = _k.run_span.py_func(*span_args(stp))
    assert out_jit == out_py
    np.testing.assert_allclose(stt.X[:400], stp.X[:400], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(stt.XH[:400], stp.XH[:400], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(stt.VS[:400], stp.VS[:400], rtol=1e-10, atol=1e-16)
