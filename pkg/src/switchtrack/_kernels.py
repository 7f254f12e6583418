"""Hot numeric kernels, numba-compiled when enabled (see :mod:`._accel`).

These functions are written in nopython-compatible style and are the single
implementation behind both the public trajectory evaluation and the engine's
inner loop; with ``SWITCHTRACK_NUMBA=0`` the same code runs as plain
Python/NumPy.

Data layout shared with the callers:

* ``cp`` (float64[10]): path center x/y, path radius, angular rate, initial
  phase, region center x/y, region radius, cushion offset L, intermediate
  scale.
* ``idx`` (int64[3]): the two position dims, heading dim (-1 for none).
* ``plan`` (float64[7]): anchor time, available-blend duration, denied
  duration, cumulative partition weights (4 entries, last is 1).
* plan kind: 0 = available-phase blend (cushion -> scaled boundary target,
  then glide on the target curve), 1 = denied-phase schedule (out-blend,
  path-following, in-blend, then glide on the cushion curve).
"""

import math

import numpy as np

from ._accel import maybe_njit

# cp layout
CP_PATH_CX = 0
CP_PATH_CY = 1
CP_PATH_R = 2
CP_OMEGA = 3
CP_PHI0 = 4
CP_REGION_CX = 5
CP_REGION_CY = 6
CP_REGION_R = 7
CP_CUSHION_L = 8
CP_SCALE = 9

# plan layout
PL_T0 = 0
PL_DTA = 1
PL_DTU = 2
PL_CUM0 = 3
PL_CUM1 = 4
PL_CUM2 = 5
PL_CUM3 = 6

PLAN_AVAILABLE = 0
PLAN_DENIED = 1

SEG_AUTO = -1
SEG_A = 0
SEG_OUT = 1
SEG_PATH = 2
SEG_IN = 3

REASON_STOP = 0
REASON_CROSSING = 1
REASON_FAULT = 2

GRAZE_TOL = 1e-4


@maybe_njit
def smootherstep_poly(rho: float) -> float:
    return rho * rho * rho * (10.0 + rho * (-15.0 + 6.0 * rho))


@maybe_njit
def smootherstep_poly_d1(rho: float) -> float:
    return rho * rho * (30.0 + rho * (-60.0 + 30.0 * rho))


@maybe_njit
def smootherstep_poly_d2(rho: float) -> float:
    return rho * (60.0 + rho * (-180.0 + 120.0 * rho))


@maybe_njit
def _curve(t, cp):
    """Endpoint curves at time t: path point g, boundary target b, cushion point.

    Returns (ang, gx, gy, gdx, gdy, bx, by, bdx, bdy, ex, ey, edx, edy).
    The boundary target is the radial projection of g onto the region
    boundary; the cushion point sits L further along the inward normal.
    """
    ang = cp[CP_OMEGA] * t + cp[CP_PHI0]
    c = math.cos(ang)
    s = math.sin(ang)
    gx = cp[CP_PATH_CX] + cp[CP_PATH_R] * c
    gy = cp[CP_PATH_CY] + cp[CP_PATH_R] * s
    gdx = -cp[CP_PATH_R] * cp[CP_OMEGA] * s
    gdy = cp[CP_PATH_R] * cp[CP_OMEGA] * c
    relx = gx - cp[CP_REGION_CX]
    rely = gy - cp[CP_REGION_CY]
    gn = math.sqrt(relx * relx + rely * rely)
    ux = relx / gn
    uy = rely / gn
    proj = ux * gdx + uy * gdy
    udx = (gdx - ux * proj) / gn
    udy = (gdy - uy * proj) / gn
    bx = cp[CP_REGION_CX] + cp[CP_REGION_R] * ux
    by = cp[CP_REGION_CY] + cp[CP_REGION_R] * uy
    bdx = cp[CP_REGION_R] * udx
    bdy = cp[CP_REGION_R] * udy
    ex = bx - cp[CP_CUSHION_L] * ux
    ey = by - cp[CP_CUSHION_L] * uy
    edx = bdx - cp[CP_CUSHION_L] * udx
    edy = bdy - cp[CP_CUSHION_L] * udy
    return ang, gx, gy, gdx, gdy, bx, by, bdx, bdy, ex, ey, edx, edy


@maybe_njit
def _clamped_rho(rho_raw, denom):
    """Clamp the blend parameter to [0, 1]; rate is zero in the clamped region."""
    if rho_raw <= 0.0:
        return 0.0, 0.0
    if rho_raw >= 1.0:
        return 1.0, 0.0
    return rho_raw, 1.0 / denom


@maybe_njit
def eval_reference(t, cp, plan, plan_kind, idx, const_vals, force_seg, out_x, out_xd):
    """Switching-trajectory value and analytic derivative at time t.

    ``force_seg`` selects a specific segment formula (for boundary
    continuity checks); pass SEG_AUTO for the scheduled piecewise choice.
    """
    n = out_x.shape[0]
    for i in range(n):
        out_x[i] = const_vals[i]
        out_xd[i] = 0.0

    ang, gx, gy, gdx, gdy, bx, by, bdx, bdy, ex, ey, edx, edy = _curve(t, cp)

    hd = idx[2]
    if hd >= 0:
        half_pi = 0.0
        if cp[CP_OMEGA] > 0.0:
            half_pi = 0.5 * math.pi
        elif cp[CP_OMEGA] < 0.0:
            half_pi = -0.5 * math.pi
        out_x[hd] = ang + half_pi
        out_xd[hd] = cp[CP_OMEGA]

    scale = cp[CP_SCALE]
    tx = scale * bx
    ty = scale * by
    tdx = scale * bdx
    tdy = scale * bdy

    seg = force_seg
    if plan_kind == PLAN_AVAILABLE:
        seg = SEG_A
    elif seg == SEG_AUTO:
        b1 = plan[PL_T0] + plan[PL_CUM1] * plan[PL_DTU]
        b2 = plan[PL_T0] + plan[PL_CUM2] * plan[PL_DTU]
        if t < b1:
            seg = SEG_OUT
        elif t < b2:
            seg = SEG_PATH
        else:
            seg = SEG_IN

    p0 = idx[0]
    p1 = idx[1]
    if seg == SEG_PATH:
        # exact path following; blending g with itself would only add roundoff
        out_x[p0] = gx
        out_x[p1] = gy
        out_xd[p0] = gdx
        out_xd[p1] = gdy
        return

    if seg == SEG_A:
        rho, rhod = _clamped_rho((t - plan[PL_T0]) / plan[PL_DTA], plan[PL_DTA])
        qx, qy, qdx, qdy = tx, ty, tdx, tdy
        rx, ry, rdx, rdy = ex, ey, edx, edy
    elif seg == SEG_OUT:
        start = plan[PL_T0] + plan[PL_CUM0] * plan[PL_DTU]
        denom = (plan[PL_CUM1] - plan[PL_CUM0]) * plan[PL_DTU]
        rho, rhod = _clamped_rho((t - start) / denom, denom)
        qx, qy, qdx, qdy = gx, gy, gdx, gdy
        rx, ry, rdx, rdy = tx, ty, tdx, tdy
    else:  # SEG_IN
        start = plan[PL_T0] + plan[PL_CUM2] * plan[PL_DTU]
        denom = (plan[PL_CUM3] - plan[PL_CUM2]) * plan[PL_DTU]
        rho, rhod = _clamped_rho((t - start) / denom, denom)
        qx, qy, qdx, qdy = ex, ey, edx, edy
        rx, ry, rdx, rdy = gx, gy, gdx, gdy

    s = smootherstep_poly(rho)
    sd = smootherstep_poly_d1(rho) * rhod
    out_x[p0] = s * qx + (1.0 - s) * rx
    out_x[p1] = s * qy + (1.0 - s) * ry
    out_xd[p0] = sd * (qx - rx) + s * qdx + (1.0 - s) * rdx
    out_xd[p1] = sd * (qy - ry) + s * qdy + (1.0 - s) * rdy


@maybe_njit
def _sd_pos(px, py, cp):
    dx = px - cp[CP_REGION_CX]
    dy = py - cp[CP_REGION_CY]
    return math.sqrt(dx * dx + dy * dy) - cp[CP_REGION_R]


@maybe_njit
def _vec_norm(v):
    acc = 0.0
    for i in range(v.shape[0]):
        acc += v[i] * v[i]
    return math.sqrt(acc)


@maybe_njit
def _all_finite(v):
    for i in range(v.shape[0]):
        if not math.isfinite(v[i]):
            return False
    return True


@maybe_njit
def run_span(
    x,
    xh,
    k0,
    k1,
    dt,
    sigma,
    method,
    A,
    K1,
    K2,
    d_bar,
    robust_kind,
    eps_hg,
    dist,
    cp,
    plan,
    plan_kind,
    idx,
    const_vals,
    T,
    X,
    XH,
    XB,
    XBD,
    VC,
    PH,
    E1N,
    E2N,
    EN,
    VS,
):
    """Advance the closed loop from step ``k0`` until ``k1``, a region
    crossing, or a numeric fault, writing one log row per departed step.

    ``x`` and ``xh`` are mutated in place. The estimate integrates
    ``xh_dot = ref_dot(t) - K1 (xh - ref(t))`` (the drift and robust
    injections cancel analytically in that form); the recorded stage
    controls are replayed into the plant so the coupled pair advances as
    one RK4 system and the error dynamics keep their closed-loop structure
    exactly. The robust term is held over the step; the disturbance is
    pre-drawn per step and held.

    Returns ``(reason, k_end, graze_count)``; on a crossing the state
    arrays hold the step-``k_end`` values and the crossing lies between
    rows ``k_end - 1`` and ``k_end``.
    """
    n = x.shape[0]
    xbar_t = np.empty(n)
    xbard_t = np.empty(n)
    xbar_h = np.empty(n)
    xbard_h = np.empty(n)
    xbar_e = np.empty(n)
    xbard_e = np.empty(n)
    vr = np.zeros(n)
    graze = 0

    p0 = idx[0]
    p1 = idx[1]
    sd_prev = _sd_pos(x[p0], x[p1], cp)

    for k in range(k0, k1):
        t = k * dt
        eval_reference(t, cp, plan, plan_kind, idx, const_vals, SEG_AUTO, xbar_t, xbard_t)
        e1 = xh - xbar_t
        e2 = x - xh
        if sigma == 0:
            if robust_kind == 0:
                vr = K2 @ e2 + d_bar * np.sign(e2)
            else:
                vr = K2 @ e2 + (d_bar * d_bar / eps_hg) * e2

        s1 = xbard_t - K1 @ e1
        v1 = s1 - A @ xh - vr

        # log row k (state at departure)
        T[k] = t
        e1n = _vec_norm(e1)
        e2n = _vec_norm(e2)
        for i in range(n):
            X[k, i] = x[i]
            XH[k, i] = xh[i]
            XB[k, i] = xbar_t[i]
            XBD[k, i] = xbard_t[i]
            VC[k, i] = v1[i]
        PH[k] = sigma
        E1N[k] = e1n
        E2N[k] = e2n
        EN[k] = _vec_norm(x - xbar_t)
        VS[k] = 0.5 * (e1n * e1n + e2n * e2n)

        d = dist[k]
        px_prev = x[p0]
        py_prev = x[p1]

        if method == 0:
            eval_reference(
                t + 0.5 * dt, cp, plan, plan_kind, idx, const_vals, SEG_AUTO, xbar_h, xbard_h
            )
            eval_reference(t + dt, cp, plan, plan_kind, idx, const_vals, SEG_AUTO, xbar_e, xbard_e)
            y2 = xh + (0.5 * dt) * s1
            s2 = xbard_h - K1 @ (y2 - xbar_h)
            v2 = s2 - A @ y2 - vr
            y3 = xh + (0.5 * dt) * s2
            s3 = xbard_h - K1 @ (y3 - xbar_h)
            v3 = s3 - A @ y3 - vr
            y4 = xh + dt * s3
            s4 = xbard_e - K1 @ (y4 - xbar_e)
            v4 = s4 - A @ y4 - vr
            xh_new = xh + (dt / 6.0) * (s1 + 2.0 * (s2 + s3) + s4)

            q1 = A @ x + v1 + d
            z2 = x + (0.5 * dt) * q1
            q2 = A @ z2 + v2 + d
            z3 = x + (0.5 * dt) * q2
            q3 = A @ z3 + v3 + d
            z4 = x + dt * q3
            q4 = A @ z4 + v4 + d
            x_new = x + (dt / 6.0) * (q1 + 2.0 * (q2 + q3) + q4)
        else:
            xh_new = xh + dt * s1
            x_new = x + dt * (A @ x + v1 + d)

        for i in range(n):
            x[i] = x_new[i]
            xh[i] = xh_new[i]

        if not (_all_finite(x) and _all_finite(xh)):
            return REASON_FAULT, k + 1, graze

        sd_new = _sd_pos(x[p0], x[p1], cp)
        if (sd_prev <= 0.0) != (sd_new <= 0.0):
            return REASON_CROSSING, k + 1, graze
        if sd_prev > 0.0 and sd_new > 0.0:
            # chord of an outside-outside step can still dip into the region
            dx = x[p0] - px_prev
            dy = x[p1] - py_prev
            dd = dx * dx + dy * dy
            if dd > 0.0:
                tau = ((cp[CP_REGION_CX] - px_prev) * dx + (cp[CP_REGION_CY] - py_prev) * dy) / dd
                if 0.0 < tau < 1.0:
                    cx = px_prev + tau * dx
                    cy = py_prev + tau * dy
                    if _sd_pos(cx, cy, cp) < -GRAZE_TOL:
                        graze += 1
        sd_prev = sd_new

    return REASON_STOP, k1, graze
