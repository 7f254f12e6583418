"""Path following with intermittent state feedback.

A closed-loop simulator and supporting library: observer/predictor
estimation across feedback loss, a switched tracking controller,
Lyapunov-based dwell-time supervision, and a smootherstep switching
trajectory that carries the system between the feedback region and a
desired path outside it.
"""

from ._accel import USING_NUMBA
from .controller import ControllerGains, control
from .engine import (
    Metrics,
    SimLog,
    compute_metrics,
    detect_crossing,
    log_metrics,
    run,
)
from .errors import (
    ConfigurationError,
    ContractViolationError,
    DegenerateInputError,
    InfeasibleScenarioError,
    NumericFaultError,
)
from .estimator import (
    EstimatorGains,
    EstimatorState,
    advance_estimate,
    estimate_deriv,
    robust_term,
)
from .geometry import (
    FeedbackRegion,
    contains,
    inward_normal,
    project_to_boundary,
    signed_distance,
)
from .plant import (
    DisturbanceModel,
    IntegratorConfig,
    PlantModel,
    drift,
    sample_disturbance,
    sample_disturbances,
    step,
)
from .scenario import PRESETS, Scenario, from_dict, load_scenario, parse_config, to_dict
from .supervisor import (
    LyapunovBudget,
    Monitor,
    Rates,
    SwitchSignal,
    compute_rates,
    max_dwell,
    max_dwell_single_integrator,
    min_dwell,
    v_sigma,
)
from .trajectory import (
    CyclePlan,
    DesiredPath,
    PartitionWeights,
    SwitchingTrajectory,
    blend,
    close_cycle,
    cushion,
    open_cycle,
    partition_times,
    smootherstep,
    smootherstep_d1,
    smootherstep_d2,
)

__version__ = "0.1.0"
