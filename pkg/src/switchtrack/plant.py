"""True-system simulation: drift dynamics, bounded disturbance, fixed-step integration.

The plant advances ``xdot = f(x, t) + v + d`` with the control ``v`` and the
disturbance ``d`` held constant over each step (zero-order hold). Fixed-step
RK4 is the default method; the robustifying term elsewhere in the loop is
discontinuous, so an adaptive integrator would thrash and logs would not be
reproducible.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericFaultError

KIND_LINEAR = "linear"
KIND_SINGLE_INTEGRATOR = "single_integrator"

METHOD_RK4 = "rk4"
METHOD_EULER = "euler"


@dataclass(frozen=True)
class PlantModel:
    """Drift dynamics ``f``: either ``f(x) = A x`` or a single integrator (``f = 0``).

    ``lipschitz_c`` must dominate the operator norm of ``A``; it feeds the
    dwell-time rate computations.
    """

    kind: str
    a_matrix: np.ndarray
    lipschitz_c: float

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float)
        object.__setattr__(self, "a_matrix", a)
        if self.kind not in (KIND_LINEAR, KIND_SINGLE_INTEGRATOR):
            raise ConfigurationError(f"unknown plant kind {self.kind!r}")
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigurationError(f"A must be square, got shape {a.shape}")
        norm_a = float(np.linalg.norm(a, 2))
        if self.kind == KIND_SINGLE_INTEGRATOR:
            if norm_a != 0.0:
                raise ConfigurationError("single-integrator plant must have A = 0")
            if self.lipschitz_c != 0.0:
                raise ConfigurationError("single-integrator plant must have lipschitz_c = 0")
        elif self.lipschitz_c < norm_a * (1.0 - 1e-12):
            raise ConfigurationError(
                f"lipschitz_c = {self.lipschitz_c} is below the operator norm of A ({norm_a})"
            )

    @property
    def n(self) -> int:
        return self.a_matrix.shape[0]

    @classmethod
    def linear(cls, a_matrix, lipschitz_c: float | None = None) -> "PlantModel":
        a = np.asarray(a_matrix, dtype=float)
        if lipschitz_c is None:
            lipschitz_c = float(np.linalg.norm(a, 2))
        return cls(KIND_LINEAR, a, lipschitz_c)

    @classmethod
    def single_integrator(cls, n: int) -> "PlantModel":
        return cls(KIND_SINGLE_INTEGRATOR, np.zeros((n, n)), 0.0)


@dataclass(frozen=True)
class DisturbanceModel:
    """Bounded exogenous disturbance: per-component uniform box, or none.

    Every emitted sample satisfies ``||d|| <= d_bar``; raw samples whose norm
    exceeds the bound are rescaled onto it and the clamp is counted.
    """

    kind: str
    low: np.ndarray = field(default=None)
    high: np.ndarray = field(default=None)
    d_bar: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform_box", "none"):
            raise ConfigurationError(f"unknown disturbance kind {self.kind!r}")
        if self.d_bar < 0:
            raise ConfigurationError("d_bar must be >= 0")
        if self.kind == "uniform_box":
            low = np.asarray(self.low, dtype=float)
            high = np.asarray(self.high, dtype=float)
            if low.shape != high.shape or low.ndim != 1:
                raise ConfigurationError("disturbance low/high must be 1-d and equal length")
            if np.any(high < low):
                raise ConfigurationError("disturbance bounds must satisfy high >= low")
            object.__setattr__(self, "low", low)
            object.__setattr__(self, "high", high)

    @classmethod
    def uniform_box(cls, low, high, d_bar: float) -> "DisturbanceModel":
        return cls("uniform_box", np.asarray(low, float), np.asarray(high, float), d_bar)

    @classmethod
    def none(cls, n: int) -> "DisturbanceModel":
        return cls("none", np.zeros(n), np.zeros(n), 0.0)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    method: str = METHOD_RK4

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if self.method not in (METHOD_RK4, METHOD_EULER):
            raise ConfigurationError(f"unknown integration method {self.method!r}")


def drift(model: PlantModel, state: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Drift rate ``f(x, t)``: ``A x`` for a linear plant, zero for a single integrator."""
    return model.a_matrix @ np.asarray(state, dtype=float)


def _clamp_to_bound(samples: np.ndarray, d_bar: float) -> tuple[np.ndarray, int]:
    norms = np.sqrt(np.sum(samples * samples, axis=1))
    over = norms > d_bar
    n_clamped = int(np.count_nonzero(over))
    if n_clamped:
        samples = samples.copy()
        samples[over] *= (d_bar / norms[over])[:, None]
    return samples, n_clamped


def sample_disturbances(
    model: DisturbanceModel, rng: np.random.Generator, count: int
) -> tuple[np.ndarray, int]:
    """Draw ``count`` disturbance vectors; returns the samples and the clamp count."""
    n = model.low.shape[0] if model.low is not None else 0
    if model.kind == "none":
        return np.zeros((count, n)), 0
    # C-order fill keeps the stream identical to `count` successive single draws.
    raw = rng.uniform(model.low, model.high, size=(count, n))
    return _clamp_to_bound(raw, model.d_bar)


def sample_disturbance(model: DisturbanceModel, rng: np.random.Generator) -> np.ndarray:
    """Draw one disturbance vector (norm clamped to ``d_bar``)."""
    samples, _ = sample_disturbances(model, rng, 1)
    return samples[0]


def step(
    model: PlantModel,
    state: np.ndarray,
    control: np.ndarray,
    disturbance: np.ndarray,
    dt: float,
    t: float = 0.0,
    method: str = METHOD_RK4,
) -> np.ndarray:
    """Advance one fixed step of ``xdot = f(x, t) + v + d`` with ``v`` and ``d`` held constant."""
    x = np.asarray(state, dtype=float)
    u = np.asarray(control, dtype=float) + np.asarray(disturbance, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise NumericFaultError("non-finite state or input passed to plant step")
    if dt <= 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    a = model.a_matrix
    if method == METHOD_EULER:
        return x + dt * (a @ x + u)
    k1 = a @ x + u
    k2 = a @ (x + 0.5 * dt * k1) + u
    k3 = a @ (x + 0.5 * dt * k2) + u
    k4 = a @ (x + dt * k3) + u
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
