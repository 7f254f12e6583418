"""Tracking control law.

The control ``v = xbar_d_dot - f(xhat) - k1 e1 - vr`` (the ``vr`` term only
while feedback is available) cancels the drift and the robust injection in
the estimate dynamics, leaving ``e1dot = -k1 e1`` identically in both
phases. The reference derivative must come from the trajectory module's
analytic form; finite-differencing the reference across blend-segment
boundaries would inject spikes into ``v``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError
from .estimator import PHASE_AVAILABLE, _check_phase_vr, _validate_spd


@dataclass(frozen=True)
class ControllerGains:
    k1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k1", np.asarray(self.k1, dtype=float))
        _validate_spd(self.k1, "k1")

    @property
    def k1_min(self) -> float:
        return float(np.linalg.eigvalsh(self.k1)[0])


def control(
    phase: str,
    xbar_d_dot: np.ndarray,
    f_hat: np.ndarray,
    e1: np.ndarray,
    gains: ControllerGains,
    vr: np.ndarray | None = None,
) -> np.ndarray:
    """Tracking control for the current phase.

    ``e1`` is the estimate tracking error ``xhat - xbar_d`` and ``f_hat``
    the drift evaluated at the estimate. Raises
    :class:`ContractViolationError` on a nonzero ``vr`` in phase ``"u"``.
    """
    vr = _check_phase_vr(phase, vr)
    v = (
        np.asarray(xbar_d_dot, dtype=float)
        - np.asarray(f_hat, dtype=float)
        - gains.k1 @ np.asarray(e1, dtype=float)
    )
    if phase == PHASE_AVAILABLE and vr.size:
        v = v - vr
    return v


__all__ = ["ControllerGains", "control", "ContractViolationError"]
