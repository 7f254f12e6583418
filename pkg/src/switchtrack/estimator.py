"""State estimate maintenance.

While feedback is available (phase ``"a"``) the estimate is driven by an
observer with a robustifying injection computed from the measured estimation
error ``e2 = x - xhat``; while feedback is denied (phase ``"u"``) a predictor
propagates the estimate open loop through the model. The estimator must
never see the true state in phase ``u``; passing a nonzero robust term there
is a contract violation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolationError
from .plant import METHOD_EULER, METHOD_RK4, PlantModel, drift

PHASE_AVAILABLE = "a"
PHASE_UNAVAILABLE = "u"

ROBUST_SLIDING = "sliding"
ROBUST_HIGHGAIN = "highgain"


def _validate_spd(matrix: np.ndarray, name: str) -> float:
    """Check symmetric positive definiteness; returns the minimum eigenvalue."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigurationError(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
        raise ConfigurationError(f"{name} must be symmetric")
    min_eig = float(np.linalg.eigvalsh(m)[0])
    if min_eig <= 0:
        raise ConfigurationError(f"{name} must be positive definite (min eigenvalue {min_eig})")
    return min_eig


@dataclass(frozen=True)
class EstimatorGains:
    """Observer gain ``k2``, disturbance bound, and the robustifier flavour.

    ``sliding`` uses the discontinuous term ``d_bar * sgn(e2)`` (with
    ``sgn(0) = 0`` so the origin stays invariant); ``highgain`` uses the
    continuous term ``(d_bar**2 / epsilon) * e2``.
    """

    k2: np.ndarray
    d_bar: float
    robust_kind: str = ROBUST_SLIDING
    epsilon: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "k2", np.asarray(self.k2, dtype=float))
        _validate_spd(self.k2, "k2")
        if self.d_bar < 0:
            raise ConfigurationError("d_bar must be >= 0")
        if self.robust_kind not in (ROBUST_SLIDING, ROBUST_HIGHGAIN):
            raise ConfigurationError(f"unknown robustifier {self.robust_kind!r}")
        if self.robust_kind == ROBUST_HIGHGAIN:
            if self.epsilon is None or self.epsilon <= 0:
                raise ConfigurationError("highgain robustifier requires epsilon > 0")

    @property
    def k2_min(self) -> float:
        return float(np.linalg.eigvalsh(self.k2)[0])


@dataclass
class EstimatorState:
    x_hat: np.ndarray

    def __post_init__(self):
        self.x_hat = np.asarray(self.x_hat, dtype=float)
        if not np.all(np.isfinite(self.x_hat)):
            raise ConfigurationError("estimate must be finite")


def robust_term(gains: EstimatorGains, e2: np.ndarray) -> np.ndarray:
    """Robustifying injection ``v_r`` computed from the measured estimation error."""
    e2 = np.asarray(e2, dtype=float)
    if gains.robust_kind == ROBUST_SLIDING:
        return gains.k2 @ e2 + gains.d_bar * np.sign(e2)
    return gains.k2 @ e2 + (gains.d_bar**2 / gains.epsilon) * e2


def _check_phase_vr(phase: str, vr: np.ndarray) -> np.ndarray:
    if phase not in (PHASE_AVAILABLE, PHASE_UNAVAILABLE):
        raise ConfigurationError(f"unknown phase {phase!r}")
    vr = np.zeros(0) if vr is None else np.asarray(vr, dtype=float)
    if phase == PHASE_UNAVAILABLE and vr.size and np.any(vr != 0.0):
        raise ContractViolationError("robust term must be zero while feedback is unavailable")
    return vr


def estimate_deriv(
    phase: str,
    model: PlantModel,
    est: EstimatorState,
    v: np.ndarray,
    vr: np.ndarray | None,
    t: float = 0.0,
) -> np.ndarray:
    """Estimate rate: observer ``f(xhat)+v+vr`` in phase a, predictor ``f(xhat)+v`` in phase u."""
    vr = _check_phase_vr(phase, vr)
    rate = drift(model, est.x_hat, t) + np.asarray(v, dtype=float)
    if phase == PHASE_AVAILABLE and vr.size:
        rate = rate + vr
    return rate


def advance_estimate(
    phase: str,
    model: PlantModel,
    est: EstimatorState,
    v: np.ndarray,
    vr: np.ndarray | None,
    dt: float,
    t: float = 0.0,
    method: str = METHOD_RK4,
) -> EstimatorState:
    """Integrate the estimate one fixed step with ``v`` and ``vr`` held constant."""
    vr = _check_phase_vr(phase, vr)
    if dt < 0:
        raise ConfigurationError(f"dt must be >= 0, got {dt}")
    if dt == 0:
        return EstimatorState(est.x_hat.copy())
    u = np.asarray(v, dtype=float)
    if phase == PHASE_AVAILABLE and vr.size:
        u = u + vr
    a = model.a_matrix
    y = est.x_hat
    if method == METHOD_EULER:
        return EstimatorState(y + dt * (a @ y + u))
    k1 = a @ y + u
    k2 = a @ (y + 0.5 * dt * k1) + u
    k3 = a @ (y + 0.5 * dt * k2) + u
    k4 = a @ (y + dt * k3) + u
    return EstimatorState(y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
