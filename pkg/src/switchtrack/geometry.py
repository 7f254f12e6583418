"""Feedback region geometry: membership, signed distance, boundary projection.

The region is a closed ball in a configurable position subspace of the
state; non-position components (e.g. a heading angle) never affect
membership. All operations are pure.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractViolationError, DegenerateInputError

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class FeedbackRegion:
    """Closed ball of radius ``radius`` around ``center`` in the position subspace.

    ``position_dims`` selects the state components the ball constrains;
    ``center`` has one entry per selected component.
    """

    center: np.ndarray
    radius: float
    position_dims: tuple = field(default=(0, 1))

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "position_dims", tuple(int(d) for d in self.position_dims))
        if self.radius <= 0:
            raise ConfigurationError(f"region radius must be > 0, got {self.radius}")
        if len(self.position_dims) == 0:
            raise ConfigurationError("position_dims must be non-empty")
        if len(set(self.position_dims)) != len(self.position_dims):
            raise ConfigurationError(f"position_dims has duplicates: {self.position_dims}")
        if any(d < 0 for d in self.position_dims):
            raise ConfigurationError(f"position_dims must be non-negative: {self.position_dims}")
        if center.ndim != 1 or center.shape[0] != len(self.position_dims):
            raise ConfigurationError(
                f"center must have one entry per position dim, got shape {center.shape} "
                f"for dims {self.position_dims}"
            )


def _position(region: FeedbackRegion, state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.ndim != 1 or state.shape[0] <= max(region.position_dims):
        raise ConfigurationError(
            f"state of shape {state.shape} does not cover position dims {region.position_dims}"
        )
    return state[list(region.position_dims)]


def signed_distance(region: FeedbackRegion, state: np.ndarray) -> float:
    """Distance to the region boundary: negative inside, zero on it, positive outside."""
    pos = _position(region, state)
    return float(np.linalg.norm(pos - region.center) - region.radius)


def contains(region: FeedbackRegion, state: np.ndarray) -> bool:
    """Membership in the closed region (boundary points count as inside)."""
    return signed_distance(region, state) <= 0.0


def project_to_boundary(region: FeedbackRegion, state: np.ndarray) -> np.ndarray:
    """Radially project the position components onto the boundary sphere.

    Non-position components pass through unchanged. A position exactly at
    the center has no defined projection and raises
    :class:`DegenerateInputError` rather than picking an arbitrary direction.
    """
    state = np.asarray(state, dtype=float)
    pos = _position(region, state)
    offset = pos - region.center
    dist = np.linalg.norm(offset)
    if dist == 0.0:
        raise DegenerateInputError("cannot project the region center onto the boundary")
    out = state.copy()
    out[list(region.position_dims)] = region.center + region.radius * (offset / dist)
    return out


def inward_normal(region: FeedbackRegion, boundary_point: np.ndarray) -> np.ndarray:
    """Unit vector at a boundary point, pointing toward the region center.

    Zero in non-position components. The point must lie on the boundary
    within ``BOUNDARY_TOL``.
    """
    sd = signed_distance(region, boundary_point)
    if abs(sd) > BOUNDARY_TOL:
        raise ContractViolationError(
            f"point is {sd:.3e} m from the boundary (tolerance {BOUNDARY_TOL:.0e})"
        )
    pos = _position(region, boundary_point)
    offset = region.center - pos
    normal = np.zeros_like(np.asarray(boundary_point, dtype=float))
    normal[list(region.position_dims)] = offset / np.linalg.norm(offset)
    return normal
